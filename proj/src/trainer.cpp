#include "shield/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "shield/parallel.hpp"
#include "shield/rng.hpp"

namespace shield {
namespace {

// Evaluation splits samples into fixed-size chunks so partial sums are
// reduced in the same order whatever the worker count.
constexpr Eigen::Index kEvalChunk = 256;

// Tag base for per-(epoch, image) augmentation streams; disjoint from the
// init (0) and shuffle (epoch + 1) tags.
constexpr std::uint64_t kAugmentTagBase = 1ULL << 32;

void fill_uniform(Eigen::MatrixXd& m, double bound, Prng& rng)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = rng.next_uniform(-bound, bound);
        }
    }
}

void fill_uniform(Eigen::VectorXd& v, double bound, Prng& rng)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = rng.next_uniform(-bound, bound);
    }
}

template <typename Fn>
decltype(auto) visit_parameter(auto& model, Eigen::Index i, Fn&& fn)
{
    auto pick_matrix = [&](auto& m) -> decltype(auto) {
        return fn(m(i / m.cols(), i % m.cols()));
    };
    if (i < model.w1.size()) return pick_matrix(model.w1);
    i -= model.w1.size();
    if (i < model.b1.size()) return fn(model.b1[i]);
    i -= model.b1.size();
    if (i < model.w2.size()) return pick_matrix(model.w2);
    i -= model.w2.size();
    return fn(model.b2[i]);
}

Eigen::MatrixXd hidden_preactivation(const ModelParams& model, const Eigen::MatrixXd& batch)
{
    Eigen::MatrixXd z = batch * model.w1.transpose();
    z.rowwise() += model.b1.transpose();
    return z;
}

Image eval_view(const Image& img, const std::optional<AugmentationConfig>& aug)
{
    if (aug && aug->crop_size > 0 && aug->crop_size < std::max(img.shape.width, img.shape.height)) {
        return center_crop(img, aug->crop_size);
    }
    return img;
}

Eigen::MatrixXd eval_matrix(const Dataset& ds, const std::optional<AugmentationConfig>& aug)
{
    const Shape shape = aug ? aug->output_shape(ds.shape()) : ds.shape();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(ds.size()), shape.size());
    parallel_for(ds.size(), [&](std::size_t i) {
        m.row(static_cast<Eigen::Index>(i)) = eval_view(ds.images[i], aug).data.transpose();
    });
    return m;
}

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
};

Evaluation evaluate(const ModelParams& model, const Eigen::MatrixXd& inputs, std::span<const int> labels)
{
    const Eigen::Index n = inputs.rows();
    const auto chunks = static_cast<std::size_t>((n + kEvalChunk - 1) / kEvalChunk);
    std::vector<long> correct(chunks, 0);
    std::vector<double> loss(chunks, 0.0);
    parallel_for(chunks, [&](std::size_t c) {
        const Eigen::Index begin = static_cast<Eigen::Index>(c) * kEvalChunk;
        const Eigen::Index len = std::min(kEvalChunk, n - begin);
        const Eigen::MatrixXd logits = forward_logits(model, inputs.middleRows(begin, len));
        const auto chunk_labels = labels.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(len));
        for (Eigen::Index r = 0; r < len; ++r) {
            Eigen::Index best = 0;
            for (Eigen::Index k = 1; k < logits.cols(); ++k) {
                if (logits(r, k) > logits(r, best)) {
                    best = k;
                }
            }
            correct[c] += best == chunk_labels[static_cast<std::size_t>(r)] ? 1 : 0;
        }
        loss[c] = softmax_cross_entropy(logits, chunk_labels).loss * static_cast<double>(len);
    });
    Evaluation e;
    e.accuracy = static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0L)) / static_cast<double>(n);
    e.loss = std::accumulate(loss.begin(), loss.end(), 0.0) / static_cast<double>(n);
    return e;
}

} // namespace

std::string_view to_string(ModelKind kind)
{
    return kind == ModelKind::linear ? "linear" : "mlp";
}

ModelKind parse_model_kind(std::string_view name)
{
    if (name == "linear") return ModelKind::linear;
    if (name == "mlp") return ModelKind::mlp;
    throw ParameterError("unknown model kind '" + std::string(name) + "'");
}

ModelParams ModelParams::zeros(const ModelConfig& cfg)
{
    if (cfg.input_dim < 1 || cfg.num_classes < 1 || (cfg.kind == ModelKind::mlp && cfg.hidden_dim < 1)) {
        throw ConfigError("model needs positive input, hidden and class dimensions");
    }
    ModelParams m;
    m.kind = cfg.kind;
    if (cfg.kind == ModelKind::linear) {
        m.w1 = Eigen::MatrixXd::Zero(cfg.num_classes, cfg.input_dim);
        m.b1 = Eigen::VectorXd::Zero(cfg.num_classes);
    } else {
        m.w1 = Eigen::MatrixXd::Zero(cfg.hidden_dim, cfg.input_dim);
        m.b1 = Eigen::VectorXd::Zero(cfg.hidden_dim);
        m.w2 = Eigen::MatrixXd::Zero(cfg.num_classes, cfg.hidden_dim);
        m.b2 = Eigen::VectorXd::Zero(cfg.num_classes);
    }
    return m;
}

ModelParams ModelParams::initialize(const ModelConfig& cfg, std::uint64_t seed)
{
    ModelParams m = zeros(cfg);
    Prng rng = Prng::child(seed, 0);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));
    fill_uniform(m.w1, bound1, rng);
    fill_uniform(m.b1, bound1, rng);
    if (cfg.kind == ModelKind::mlp) {
        const double bound2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
        fill_uniform(m.w2, bound2, rng);
        fill_uniform(m.b2, bound2, rng);
    }
    return m;
}

Eigen::Index ModelParams::parameter_count() const
{
    return w1.size() + b1.size() + w2.size() + b2.size();
}

double& ModelParams::parameter(Eigen::Index i)
{
    return visit_parameter(*this, i, [](double& p) -> double& { return p; });
}

double ModelParams::parameter(Eigen::Index i) const
{
    return visit_parameter(*this, i, [](const double& p) { return p; });
}

bool ModelParams::all_finite() const
{
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

Eigen::MatrixXd forward_logits(const ModelParams& model, const Eigen::MatrixXd& batch)
{
    if (batch.cols() != model.input_dim()) {
        throw ShapeError("input dimension " + std::to_string(batch.cols()) + " does not match model (" +
                         std::to_string(model.input_dim()) + ")");
    }
    if (model.kind == ModelKind::linear) {
        return hidden_preactivation(model, batch);
    }
    const Eigen::MatrixXd hidden = hidden_preactivation(model, batch).cwiseMax(0.0);
    Eigen::MatrixXd logits = hidden * model.w2.transpose();
    logits.rowwise() += model.b2.transpose();
    return logits;
}

LossAndGrad softmax_cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels)
{
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
        throw ShapeError("label count does not match logit rows");
    }
    const Eigen::Index n = logits.rows();
    LossAndGrad out;
    out.grad_logits.resize(n, logits.cols());
    double total = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        if (y < 0 || y >= logits.cols()) {
            throw ConfigError("label " + std::to_string(y) + " outside the model's classes");
        }
        const double peak = logits.row(r).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(r).array() - peak).exp().matrix();
        const double z = e.sum();
        total += std::log(z) - (logits(r, y) - peak);
        out.grad_logits.row(r) = e / z;
        out.grad_logits(r, y) -= 1.0;
    }
    if (n > 0) {
        out.loss = total / static_cast<double>(n);
        out.grad_logits /= static_cast<double>(n);
    }
    return out;
}

Backprop loss_and_gradients(const ModelParams& model, const Eigen::MatrixXd& batch, std::span<const int> labels)
{
    if (batch.cols() != model.input_dim()) {
        throw ShapeError("input dimension does not match model");
    }
    Backprop out;
    out.grads.kind = model.kind;
    if (model.kind == ModelKind::linear) {
        const auto lg = softmax_cross_entropy(hidden_preactivation(model, batch), labels);
        out.loss = lg.loss;
        out.grads.w1 = lg.grad_logits.transpose() * batch;
        out.grads.b1 = lg.grad_logits.colwise().sum().transpose();
        return out;
    }
    const Eigen::MatrixXd pre = hidden_preactivation(model, batch);
    const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
    Eigen::MatrixXd logits = hidden * model.w2.transpose();
    logits.rowwise() += model.b2.transpose();
    const auto lg = softmax_cross_entropy(logits, labels);
    out.loss = lg.loss;
    out.grads.w2 = lg.grad_logits.transpose() * hidden;
    out.grads.b2 = lg.grad_logits.colwise().sum().transpose();
    const Eigen::MatrixXd grad_pre =
        ((lg.grad_logits * model.w2).array() * (pre.array() > 0.0).cast<double>()).matrix();
    out.grads.w1 = grad_pre.transpose() * batch;
    out.grads.b1 = grad_pre.colwise().sum().transpose();
    return out;
}

ModelParams sgd_step(const ModelParams& model, const ModelParams& grads, double lr)
{
    if (!(lr > 0.0)) {
        throw ParameterError("learning rate must be > 0");
    }
    ModelParams next = model;
    next.w1 -= lr * grads.w1;
    next.b1 -= lr * grads.b1;
    if (model.kind == ModelKind::mlp) {
        next.w2 -= lr * grads.w2;
        next.b2 -= lr * grads.b2;
    }
    return next;
}

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0)) {
        throw ParameterError("learning rate must be > 0");
    }
    if (epochs < 1 || batch_size < 1) {
        throw ParameterError("epochs and batch size must be >= 1");
    }
}

const EpochStats& EvalReport::best() const
{
    return epochs.at(static_cast<std::size_t>(best_epoch));
}

std::string EvalReport::to_csv() const
{
    std::string out = "epoch,train_acc,val_acc,train_loss\n";
    char line[128];
    for (const auto& e : epochs) {
        std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f\n", e.epoch, e.train_accuracy, e.val_accuracy,
                      e.train_loss);
        out += line;
    }
    if (!epochs.empty()) {
        const auto& b = best();
        std::snprintf(line, sizeof line, "best,%.6f,%.6f,%.6f\n", b.train_accuracy, b.val_accuracy,
                      b.train_loss);
        out += line;
    }
    return out;
}

Eigen::MatrixXd to_matrix(const Dataset& ds)
{
    return eval_matrix(ds, std::nullopt);
}

std::vector<int> predict(const ModelParams& model, const Eigen::MatrixXd& inputs)
{
    const Eigen::MatrixXd logits = forward_logits(model, inputs);
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < logits.cols(); ++k) {
            if (logits(r, k) > logits(r, best)) {
                best = k;
            }
        }
        out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

double evaluate_accuracy(const ModelParams& model, const Eigen::MatrixXd& inputs, std::span<const int> labels)
{
    if (inputs.rows() == 0) {
        throw ConfigError("cannot measure accuracy on an empty dataset");
    }
    if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
        throw ShapeError("label count does not match inputs");
    }
    return evaluate(model, inputs, labels).accuracy;
}

double evaluate_accuracy(const ModelParams& model, const Dataset& ds)
{
    if (ds.empty()) {
        throw ConfigError("cannot measure accuracy on an empty dataset");
    }
    return evaluate_accuracy(model, to_matrix(ds), ds.labels);
}

TrainResult train(const ModelConfig& model_cfg, const Dataset& train_ds, const Dataset& val_ds,
                  const TrainConfig& cfg)
{
    cfg.validate();
    if (train_ds.empty() || val_ds.empty()) {
        throw ConfigError("training needs non-empty train and validation sets");
    }
    validate(train_ds);
    validate(val_ds);
    require_same_shape(train_ds.shape(), val_ds.shape(), "train/val");
    if (train_ds.num_classes != val_ds.num_classes) {
        throw ConfigError("train and validation sets disagree on the class count");
    }
    if (cfg.augmentation) {
        cfg.augmentation->validate(train_ds.shape());
    }

    ModelConfig mc = model_cfg;
    mc.num_classes = train_ds.num_classes;
    mc.input_dim = static_cast<int>(
        (cfg.augmentation ? cfg.augmentation->output_shape(train_ds.shape()) : train_ds.shape()).size());

    TrainResult result;
    result.model = ModelParams::initialize(mc, cfg.seed);

    const Eigen::MatrixXd train_eval = eval_matrix(train_ds, cfg.augmentation);
    const Eigen::MatrixXd val_eval = eval_matrix(val_ds, cfg.augmentation);

    const std::size_t n = train_ds.size();
    std::vector<std::size_t> order(n);
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    Eigen::MatrixXd xb;
    std::vector<int> yb;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (cfg.shuffle) {
            Prng rng = Prng::child(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
            for (std::size_t i = n; i > 1; --i) {
                std::swap(order[i - 1], order[rng.next_below(i)]);
            }
        }
        const std::uint64_t aug_seed = Prng::derive_seed(cfg.seed, kAugmentTagBase + static_cast<std::uint64_t>(epoch));

        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t len = std::min(batch, n - start);
            xb.resize(static_cast<Eigen::Index>(len), mc.input_dim);
            yb.resize(len);
            if (cfg.augmentation) {
                parallel_for(len, [&](std::size_t j) {
                    const std::size_t idx = order[start + j];
                    Prng rng = Prng::child(aug_seed, idx);
                    xb.row(static_cast<Eigen::Index>(j)) =
                        augmentation_pipeline(train_ds.images[idx], *cfg.augmentation, rng).data.transpose();
                });
            } else {
                for (std::size_t j = 0; j < len; ++j) {
                    xb.row(static_cast<Eigen::Index>(j)) = train_eval.row(static_cast<Eigen::Index>(order[start + j]));
                }
            }
            for (std::size_t j = 0; j < len; ++j) {
                yb[j] = train_ds.labels[order[start + j]];
            }
            const auto bp = loss_and_gradients(result.model, xb, yb);
            result.model = sgd_step(result.model, bp.grads, cfg.learning_rate);
        }

        const Evaluation tr = evaluate(result.model, train_eval, train_ds.labels);
        const Evaluation va = evaluate(result.model, val_eval, val_ds.labels);
        result.report.epochs.push_back({epoch + 1, tr.accuracy, va.accuracy, tr.loss});
    }

    auto& report = result.report;
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        if (report.epochs[e].val_accuracy > report.best_val_accuracy || e == 0) {
            report.best_val_accuracy = report.epochs[e].val_accuracy;
            report.best_epoch = static_cast<int>(e);
        }
    }
    report.generalization_gap = report.final_epoch().train_accuracy - report.final_epoch().val_accuracy;
    return result;
}

double gradient_check(const ModelConfig& model_cfg, const Eigen::MatrixXd& sample, std::span<const int> labels,
                      const GradientCheckOptions& opts)
{
    ModelParams model = ModelParams::initialize(model_cfg, opts.seed);
    if (model.kind == ModelKind::mlp) {
        // Shift hidden biases until no pre-activation sits near the ReLU kink,
        // where central differences straddle a non-differentiable point.
        for (Eigen::Index j = 0; j < model.b1.size(); ++j) {
            for (int attempt = 0; attempt < 1000; ++attempt) {
                const Eigen::VectorXd z = (sample * model.w1.row(j).transpose()).array() + model.b1[j];
                if (z.size() == 0 || z.cwiseAbs().minCoeff() >= opts.kink_margin) {
                    break;
                }
                model.b1[j] += 2.0 * opts.kink_margin;
            }
        }
    }

    const ModelParams analytic = loss_and_gradients(model, sample, labels).grads;
    const Eigen::Index count = model.parameter_count();
    Prng rng = Prng::child(opts.seed, 0xC4ECULL);
    double worst = 0.0;
    for (int s = 0; s < opts.samples; ++s) {
        const auto i = static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(count)));
        const double original = model.parameter(i);
        model.parameter(i) = original + opts.step;
        const double up = loss_and_gradients(model, sample, labels).loss;
        model.parameter(i) = original - opts.step;
        const double down = loss_and_gradients(model, sample, labels).loss;
        model.parameter(i) = original;

        const double numeric = (up - down) / (2.0 * opts.step);
        const double exact = analytic.parameter(i);
        // absolute floor keeps round-off on near-zero gradients from dominating
        const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-6});
        worst = std::max(worst, std::abs(numeric - exact) / scale);
    }
    return worst;
}

} // namespace shield
