#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace saml {

// One affine map followed (on hidden layers) by a PReLU with a single learnable
// slope. The slope of the output layer is carried but never used.
struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  double slope = 0.25;
};

// Feed-forward network: affine + PReLU on every hidden layer, linear output.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::vector<int> dims() const;

  // Flat parameter order: per layer, weight row-major, then bias, then the
  // slope for hidden layers only.
  std::size_t parameter_count() const;
  Eigen::VectorXd flat() const;
  void assign_flat(const Eigen::VectorXd& values);

  bool all_finite() const;

 private:
  void validate() const;

  std::vector<Layer> layers_;
};

// Gradient with the same layout as an Mlp (including a slope gradient per
// hidden layer).
struct GradientBuffer {
  std::vector<Layer> layers;

  static GradientBuffer zeros_like(const Mlp& model);
  bool congruent_with(const Mlp& model) const;
  Eigen::VectorXd flat() const;  // same order as Mlp::flat()
  bool all_finite() const;
  void set_zero();
  GradientBuffer& operator+=(const GradientBuffer& other);
  GradientBuffer& operator*=(double scale);
};

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(Eigen::Index n);
};

// Hidden weights and biases ~ U(-1/sqrt(fanIn), 1/sqrt(fanIn)) from a Pcg32
// seeded with `seed`; hidden slopes start at 0.25. With zero_output_layer the
// final weight and bias are zero, so the network initially outputs 0.
Mlp mlp_init(std::span<const int> layer_dims, std::uint64_t seed, bool zero_output_layer);

Eigen::VectorXd mlp_forward(const Mlp& model, const Eigen::VectorXd& input);

// Reverse-mode gradient of dot(output_cotangent, mlp_forward(model, input)).
// PReLU at z == 0 takes the z >= 0 branch.
GradientBuffer mlp_backward(const Mlp& model, const Eigen::VectorXd& input,
                            const Eigen::VectorXd& output_cotangent);

// Batched variants. Columns are samples.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;          // input to layer k
  std::vector<Eigen::MatrixXd> preactivations;  // z_k
};

Eigen::MatrixXd mlp_forward_batch(const Mlp& model, const Eigen::MatrixXd& inputs,
                                  ForwardCache* cache = nullptr);

// Accumulates the summed-over-columns parameter gradient into `grads` and
// returns the input cotangent.
Eigen::MatrixXd mlp_backward_batch(const Mlp& model, const ForwardCache& cache,
                                   const Eigen::MatrixXd& output_cotangent, GradientBuffer& grads);

// Bias-corrected Adam. Throws TrainingError on a non-finite gradient, leaving
// params and state untouched.
void adam_update(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad,
                 AdamState& state, double learning_rate);
void adam_step(Mlp& model, const GradientBuffer& grads, AdamState& state, double learning_rate);
void sgd_step(Mlp& model, const GradientBuffer& grads, double learning_rate);

// Single-sample evaluator with preallocated buffers; used in the inner loops
// of trajectory optimization. Holds a reference to `model`.
class MlpEvaluator {
 public:
  explicit MlpEvaluator(const Mlp& model);

  const Eigen::VectorXd& forward(const Eigen::Ref<const Eigen::VectorXd>& input);
  // d output / d input at the input of the most recent forward().
  const Eigen::MatrixXd& input_jacobian();

 private:
  const Mlp* model_;
  std::vector<Eigen::VectorXd> z_;
  std::vector<Eigen::VectorXd> a_;
  std::vector<Eigen::MatrixXd> jac_;
};

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
};

nlohmann::json to_checkpoint(const Mlp& model, const CheckpointMeta& meta);
Mlp from_checkpoint(const nlohmann::json& doc, CheckpointMeta* meta = nullptr);
void save_checkpoint(const std::filesystem::path& path, const Mlp& model, const CheckpointMeta& meta);
Mlp load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace saml
