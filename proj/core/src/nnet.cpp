#include "saml/nnet.hpp"

#include <cmath>
#include <string>

#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/rng.hpp"

namespace saml {

namespace {

bool is_hidden(std::size_t k, std::size_t count) { return k + 1 < count; }

void prelu_inplace(Eigen::Ref<Eigen::MatrixXd> z, double slope) {
  z = z.unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
}

}  // namespace

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

void Mlp::validate() const {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
      throw ConfigError("layer " + std::to_string(k) + " has an empty weight matrix");
    if (layer.bias.size() != layer.weight.rows())
      throw ConfigError("layer " + std::to_string(k) + " bias length does not match its weight rows");
    if (k > 0 && layer.weight.cols() != layers_[k - 1].weight.rows())
      throw ConfigError("layer " + std::to_string(k) + " input does not chain with the previous layer");
  }
  if (!all_finite()) throw ConfigError("network parameters must be finite");
}

Eigen::Index Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }

Eigen::Index Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

std::vector<int> Mlp::dims() const {
  std::vector<int> out;
  if (layers_.empty()) return out;
  out.push_back(static_cast<int>(input_dim()));
  for (const auto& layer : layers_) out.push_back(static_cast<int>(layer.weight.rows()));
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    n += static_cast<std::size_t>(layers_[k].weight.size() + layers_[k].bias.size());
    if (is_hidden(k, layers_.size())) ++n;
  }
  return n;
}

namespace {

template <class LayerVec, class Fn>
void visit_flat(LayerVec& layers, Fn&& fn) {
  Eigen::Index idx = 0;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& layer = layers[k];
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) fn(idx++, layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) fn(idx++, layer.bias[r]);
    if (is_hidden(k, layers.size())) fn(idx++, layer.slope);
  }
}

bool layers_finite(const std::vector<Layer>& layers) {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite() || !std::isfinite(layer.slope)) return false;
  }
  return true;
}

}  // namespace

Eigen::VectorXd Mlp::flat() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  visit_flat(layers_, [&](Eigen::Index i, const double& v) { out[i] = v; });
  return out;
}

void Mlp::assign_flat(const Eigen::VectorXd& values) {
  detail::require(values.size() == static_cast<Eigen::Index>(parameter_count()),
                  "flat parameter vector has the wrong length");
  visit_flat(layers_, [&](Eigen::Index i, double& v) { v = values[i]; });
}

bool Mlp::all_finite() const { return layers_finite(layers_); }

// ---------------------------------------------------------------------------
// GradientBuffer

GradientBuffer GradientBuffer::zeros_like(const Mlp& model) {
  GradientBuffer g;
  g.layers.reserve(model.layer_count());
  for (const auto& layer : model.layers()) {
    g.layers.push_back(Layer{Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                             Eigen::VectorXd::Zero(layer.bias.size()), 0.0});
  }
  return g;
}

bool GradientBuffer::congruent_with(const Mlp& model) const {
  if (layers.size() != model.layer_count()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& a = layers[k];
    const auto& b = model.layers()[k];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.bias.size() != b.bias.size())
      return false;
  }
  return true;
}

Eigen::VectorXd GradientBuffer::flat() const {
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < layers.size(); ++k)
    n += layers[k].weight.size() + layers[k].bias.size() + (is_hidden(k, layers.size()) ? 1 : 0);
  Eigen::VectorXd out(n);
  visit_flat(layers, [&](Eigen::Index i, const double& v) { out[i] = v; });
  return out;
}

bool GradientBuffer::all_finite() const { return layers_finite(layers); }

void GradientBuffer::set_zero() {
  for (auto& layer : layers) {
    layer.weight.setZero();
    layer.bias.setZero();
    layer.slope = 0.0;
  }
}

GradientBuffer& GradientBuffer::operator+=(const GradientBuffer& other) {
  detail::require(other.layers.size() == layers.size(), "gradient buffers are not congruent");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += other.layers[k].weight;
    layers[k].bias += other.layers[k].bias;
    layers[k].slope += other.layers[k].slope;
  }
  return *this;
}

GradientBuffer& GradientBuffer::operator*=(double scale) {
  for (auto& layer : layers) {
    layer.weight *= scale;
    layer.bias *= scale;
    layer.slope *= scale;
  }
  return *this;
}

AdamState AdamState::for_size(Eigen::Index n) {
  AdamState s;
  s.first_moment = Eigen::VectorXd::Zero(n);
  s.second_moment = Eigen::VectorXd::Zero(n);
  return s;
}

// ---------------------------------------------------------------------------
// init / forward / backward

Mlp mlp_init(std::span<const int> layer_dims, std::uint64_t seed, bool zero_output_layer) {
  if (layer_dims.size() < 2) throw ConfigError("layerDims needs at least an input and an output size");
  for (int d : layer_dims)
    if (d <= 0) throw ConfigError("layerDims entries must be positive");

  Pcg32 rng(seed);
  std::vector<Layer> layers;
  const std::size_t count = layer_dims.size() - 1;
  for (std::size_t k = 0; k < count; ++k) {
    const int fan_in = layer_dims[k];
    const int fan_out = layer_dims[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Layer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd(fan_out), 0.25};
    // Draws are consumed even for a zeroed output layer so hidden weights do
    // not depend on the flag.
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    for (int r = 0; r < fan_out; ++r) layer.bias[r] = rng.uniform(-bound, bound);
    if (!is_hidden(k, count)) {
      layer.slope = 0.0;
      if (zero_output_layer) {
        layer.weight.setZero();
        layer.bias.setZero();
      }
    }
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

Eigen::MatrixXd mlp_forward_batch(const Mlp& model, const Eigen::MatrixXd& inputs, ForwardCache* cache) {
  detail::require(inputs.rows() == model.input_dim(), "network input has the wrong dimension");
  const auto& layers = model.layers();
  if (cache) {
    cache->inputs.resize(layers.size());
    cache->preactivations.resize(layers.size());
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Eigen::MatrixXd z = layers[k].weight * a;
    z.colwise() += layers[k].bias;
    if (cache) {
      cache->inputs[k] = std::move(a);
      cache->preactivations[k] = z;
    }
    if (is_hidden(k, layers.size())) prelu_inplace(z, layers[k].slope);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd mlp_backward_batch(const Mlp& model, const ForwardCache& cache,
                                   const Eigen::MatrixXd& output_cotangent, GradientBuffer& grads) {
  const auto& layers = model.layers();
  detail::require(cache.inputs.size() == layers.size(), "forward cache does not match the network");
  detail::require(grads.congruent_with(model), "gradient buffer is not congruent with the network");
  detail::require(output_cotangent.rows() == model.output_dim() &&
                      output_cotangent.cols() == cache.inputs.front().cols(),
                  "output cotangent has the wrong shape");

  Eigen::MatrixXd g = output_cotangent;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Eigen::MatrixXd& z = cache.preactivations[k];
    if (is_hidden(k, layers.size())) {
      const double slope = layers[k].slope;
      grads.layers[k].slope += (g.array() * z.array().min(0.0)).sum();
      g = (z.array() >= 0.0).select(g, slope * g);
    }
    grads.layers[k].weight.noalias() += g * cache.inputs[k].transpose();
    grads.layers[k].bias += g.rowwise().sum();
    Eigen::MatrixXd next = layers[k].weight.transpose() * g;
    g = std::move(next);
  }
  return g;
}

Eigen::VectorXd mlp_forward(const Mlp& model, const Eigen::VectorXd& input) {
  return mlp_forward_batch(model, input);
}

GradientBuffer mlp_backward(const Mlp& model, const Eigen::VectorXd& input,
                            const Eigen::VectorXd& output_cotangent) {
  ForwardCache cache;
  mlp_forward_batch(model, input, &cache);
  GradientBuffer grads = GradientBuffer::zeros_like(model);
  mlp_backward_batch(model, cache, output_cotangent, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// updates

void adam_update(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad,
                 AdamState& state, double learning_rate) {
  detail::require(params.size() == grad.size(), "parameter and gradient lengths differ");
  if (state.first_moment.size() != params.size()) {
    detail::require(state.step_count == 0, "Adam state does not match the parameter count");
    state.first_moment = Eigen::VectorXd::Zero(params.size());
    state.second_moment = Eigen::VectorXd::Zero(params.size());
  }
  if (!grad.allFinite()) throw TrainingError("non-finite gradient passed to Adam");

  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.array().square().matrix();
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

void adam_step(Mlp& model, const GradientBuffer& grads, AdamState& state, double learning_rate) {
  detail::require(grads.congruent_with(model), "gradient buffer is not congruent with the network");
  Eigen::VectorXd params = model.flat();
  adam_update(params, grads.flat(), state, learning_rate);
  model.assign_flat(params);
}

void sgd_step(Mlp& model, const GradientBuffer& grads, double learning_rate) {
  detail::require(grads.congruent_with(model), "gradient buffer is not congruent with the network");
  const Eigen::VectorXd g = grads.flat();
  if (!g.allFinite()) throw TrainingError("non-finite gradient passed to SGD");
  model.assign_flat(model.flat() - learning_rate * g);
}

// ---------------------------------------------------------------------------
// MlpEvaluator

MlpEvaluator::MlpEvaluator(const Mlp& model) : model_(&model) {
  const auto& layers = model.layers();
  for (const auto& layer : layers) {
    z_.emplace_back(layer.weight.rows());
    a_.emplace_back(layer.weight.rows());
    jac_.emplace_back(layer.weight.rows(), model.input_dim());
  }
}

const Eigen::VectorXd& MlpEvaluator::forward(const Eigen::Ref<const Eigen::VectorXd>& input) {
  const auto& layers = model_->layers();
  detail::require(input.size() == model_->input_dim(), "network input has the wrong dimension");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (k == 0)
      z_[k].noalias() = layers[k].weight * input;
    else
      z_[k].noalias() = layers[k].weight * a_[k - 1];
    z_[k] += layers[k].bias;
    if (is_hidden(k, layers.size())) {
      const double slope = layers[k].slope;
      a_[k] = z_[k].unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
    } else {
      a_[k] = z_[k];
    }
  }
  return a_.back();
}

const Eigen::MatrixXd& MlpEvaluator::input_jacobian() {
  const auto& layers = model_->layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (k == 0)
      jac_[k] = layers[k].weight;
    else
      jac_[k].noalias() = layers[k].weight * jac_[k - 1];
    if (is_hidden(k, layers.size())) {
      const double slope = layers[k].slope;
      for (Eigen::Index r = 0; r < z_[k].size(); ++r)
        if (z_[k][r] < 0.0) jac_[k].row(r) *= slope;
    }
  }
  return jac_.back();
}

// ---------------------------------------------------------------------------
// checkpoints

json to_checkpoint(const Mlp& model, const CheckpointMeta& meta) {
  json doc;
  doc["layerDims"] = model.dims();
  json layers = json::array();
  for (const auto& layer : model.layers()) {
    json w = json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) row.push_back(layer.weight(r, c));
      w.push_back(std::move(row));
    }
    layers.push_back({{"w", std::move(w)}, {"b", to_json(layer.bias)}, {"a", layer.slope}});
  }
  doc["layers"] = std::move(layers);
  doc["meta"] = {{"seed", meta.seed}, {"epoch", meta.epoch}};
  return doc;
}

Mlp from_checkpoint(const json& doc, CheckpointMeta* meta) {
  try {
    const auto dims = doc.at("layerDims").get<std::vector<int>>();
    const auto& jl = doc.at("layers");
    if (dims.size() != jl.size() + 1) throw ConfigError("checkpoint layerDims does not match its layers");
    std::vector<Layer> layers;
    for (std::size_t k = 0; k < jl.size(); ++k) {
      const auto& w = jl[k].at("w");
      Layer layer{Eigen::MatrixXd(dims[k + 1], dims[k]), vector_from_json(jl[k].at("b")),
                  jl[k].at("a").get<double>()};
      if (w.size() != static_cast<std::size_t>(dims[k + 1]))
        throw ConfigError("checkpoint weight rows do not match layerDims");
      for (int r = 0; r < dims[k + 1]; ++r) {
        if (w[r].size() != static_cast<std::size_t>(dims[k]))
          throw ConfigError("checkpoint weight columns do not match layerDims");
        for (int c = 0; c < dims[k]; ++c) layer.weight(r, c) = w[r][c].get<double>();
      }
      layers.push_back(std::move(layer));
    }
    if (meta) {
      const auto& m = doc.value("meta", json::object());
      meta->seed = m.value("seed", std::uint64_t{0});
      meta->epoch = m.value("epoch", std::int64_t{0});
    }
    return Mlp(std::move(layers));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Mlp& model, const CheckpointMeta& meta) {
  write_json_file(path, to_checkpoint(model, meta));
}

Mlp load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  return from_checkpoint(read_json_file(path), meta);
}

}  // namespace saml
