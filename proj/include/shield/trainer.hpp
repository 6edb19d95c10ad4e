#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shield/core.hpp"
#include "shield/countermeasures.hpp"

namespace shield {

enum class ModelKind { linear, mlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelConfig {
    ModelKind kind = ModelKind::linear;
    int input_dim = 0;
    int hidden_dim = 64;
    int num_classes = 0;
};

/// Weights of a softmax classifier.
///   linear: logits = X W1^T + b1           (W1: K x D)
///   mlp:    logits = relu(X W1^T + b1) W2^T + b2   (W1: H x D, W2: K x H)
/// The same struct holds gradients with matching layout.
struct ModelParams {
    ModelKind kind = ModelKind::linear;
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    static ModelParams zeros(const ModelConfig& cfg);
    /// Every parameter ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], filled layer by
    /// layer (weights row-major, then bias) from child(seed, 0).
    static ModelParams initialize(const ModelConfig& cfg, std::uint64_t seed);

    [[nodiscard]] Eigen::Index input_dim() const { return w1.cols(); }
    [[nodiscard]] Eigen::Index num_classes() const
    {
        return kind == ModelKind::linear ? w1.rows() : w2.rows();
    }
    [[nodiscard]] Eigen::Index parameter_count() const;
    /// Flat access in the initialization order.
    [[nodiscard]] double& parameter(Eigen::Index i);
    [[nodiscard]] double parameter(Eigen::Index i) const;
    [[nodiscard]] bool all_finite() const;
};

/// Rows of `batch` are flattened images; returns one logit row per sample.
[[nodiscard]] Eigen::MatrixXd forward_logits(const ModelParams& model, const Eigen::MatrixXd& batch);

struct LossAndGrad {
    double loss = 0.0;
    Eigen::MatrixXd grad_logits;
};

/// Mean cross-entropy of softmax(logits) against labels, with max-subtraction.
/// grad_logits = (softmax - onehot) / batch.
[[nodiscard]] LossAndGrad softmax_cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels);

struct Backprop {
    double loss = 0.0;
    ModelParams grads;
};

[[nodiscard]] Backprop loss_and_gradients(const ModelParams& model, const Eigen::MatrixXd& batch,
                                          std::span<const int> labels);

/// Plain SGD: p <- p - lr * g for every parameter.
[[nodiscard]] ModelParams sgd_step(const ModelParams& model, const ModelParams& grads, double lr);

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 30;
    int batch_size = 64;
    std::uint64_t seed = 0;
    bool shuffle = true;
    /// Fresh augmentation per (image, epoch); crops also center-crop the
    /// evaluation inputs so train and val share the model's input size.
    std::optional<AugmentationConfig> augmentation;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double train_loss = 0.0;
};

struct EvalReport {
    std::vector<EpochStats> epochs;
    double best_val_accuracy = 0.0;
    int best_epoch = 0;
    /// Final-epoch train accuracy minus val accuracy.
    double generalization_gap = 0.0;

    [[nodiscard]] const EpochStats& final_epoch() const { return epochs.back(); }
    [[nodiscard]] const EpochStats& best() const;
    /// `epoch,train_acc,val_acc,train_loss`, one row per epoch, then a
    /// `best,` row repeating the stats of the best-validation epoch.
    [[nodiscard]] std::string to_csv() const;
};

struct TrainResult {
    ModelParams model;
    EvalReport report;
};

/// Stacks flattened images as matrix rows.
[[nodiscard]] Eigen::MatrixXd to_matrix(const Dataset& ds);

[[nodiscard]] TrainResult train(const ModelConfig& model_cfg, const Dataset& train_ds,
                                const Dataset& val_ds, const TrainConfig& cfg);

/// Fraction of samples whose argmax logit (lowest index on ties) equals the label.
[[nodiscard]] double evaluate_accuracy(const ModelParams& model, const Dataset& ds);
[[nodiscard]] double evaluate_accuracy(const ModelParams& model, const Eigen::MatrixXd& inputs,
                                       std::span<const int> labels);

/// Lowest-index argmax per row.
[[nodiscard]] std::vector<int> predict(const ModelParams& model, const Eigen::MatrixXd& inputs);

struct GradientCheckOptions {
    int samples = 100;
    double step = 1e-4;
    std::uint64_t seed = 0;
    /// Hidden pre-activations are kept at least this far from the ReLU kink.
    double kink_margin = 1e-3;
};

/// Max relative error between analytic and central-difference gradients on
/// randomly chosen parameters of a freshly initialized model.
[[nodiscard]] double gradient_check(const ModelConfig& model_cfg, const Eigen::MatrixXd& sample,
                                    std::span<const int> labels, const GradientCheckOptions& opts = {});

} // namespace shield
