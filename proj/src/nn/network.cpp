#include "wasncal/nn/network.hpp"

namespace wasncal::nn {

Shape Sequential::output_shape(Shape input) const {
  for (const auto& layer : layers_) input = layer->output_shape(input);
  return input;
}

Tensor Sequential::forward(Tensor x, Mode mode, std::optional<std::size_t> tap_index, Tensor* tap) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i]->forward(x, mode);
    if (tap && tap_index && *tap_index == i) *tap = x;
  }
  return x;
}

Tensor Sequential::backward(Tensor grad) {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) grad = (*it)->backward(grad);
  return grad;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_)
    for (Parameter* p : layer->parameters()) out.push_back(p);
  return out;
}

json Sequential::spec() const {
  json j = json::array();
  for (const auto& layer : layers_) j.push_back(layer->spec());
  return j;
}

Network::Network(const json& architecture, std::uint64_t seed) : architecture_(architecture), seed_(seed) {
  input_shape_ = architecture.at("input_shape").get<Shape>();
  aux_width_ = architecture.value("aux_width", Eigen::Index{0});
  const auto tap = architecture.value("tap", -1);
  if (tap >= 0) tap_ = static_cast<std::size_t>(tap);

  std::uint64_t index = 0;
  auto build = [&](const char* stage, Sequential& seq) {
    std::size_t i = 0;
    for (const auto& spec : architecture.at(stage)) {
      auto layer = make_layer(spec);
      layer->set_name(std::string(stage) + "." + std::to_string(i++) + "." + layer->kind());
      Rng rng = make_rng(seed, "init", index++);
      layer->initialize(rng);
      seq.add(std::move(layer));
    }
  };
  build("trunk", trunk_);
  build("head", head_);

  const Shape trunk_out = trunk_.output_shape(input_shape_);
  if (aux_width_ > 0 && trunk_out.size() != 1)
    throw ShapeError("network " + architecture.value("name", std::string("?")) +
                     ": auxiliary concat needs a flat trunk output, got " + shape_string(trunk_out));
  trunk_width_ = numel(trunk_out);
  Shape head_in = trunk_out;
  if (aux_width_ > 0) head_in = {trunk_width_ + aux_width_};
  const Shape out = head_.output_shape(head_in);
  if (out.size() != 1) throw ShapeError("network output must be (C), got " + shape_string(out));
  num_classes_ = out[0];
  if (tap_ && *tap_ >= head_.size()) throw ShapeError("tap index outside the head");
}

Tensor Network::forward(const Tensor& x, Mode mode, const Tensor* aux) {
  if (x.sample_shape() != input_shape_)
    throw ShapeError("network input: expected per-example shape " + shape_string(input_shape_) + ", got " +
                     shape_string(x.sample_shape()));
  Tensor h = trunk_.forward(x, mode);
  if (aux_width_ > 0) {
    if (!aux || aux->rank() != 2 || aux->dim(0) != x.batch() || aux->dim(1) != aux_width_)
      throw ShapeError("network input: auxiliary tensor must be (" + std::to_string(x.batch()) + ", " +
                       std::to_string(aux_width_) + ")");
    Tensor cat({x.batch(), trunk_width_ + aux_width_});
    cat.flat().leftCols(trunk_width_) = h.flat();
    cat.flat().rightCols(aux_width_) = aux->flat();
    h = std::move(cat);
  }
  Tensor logits = head_.forward(std::move(h), mode, tap_, &tap_output_);
  have_tap_ = tap_.has_value();
  ready_for_backward_ = mode == Mode::Train;
  return logits;
}

Tensor Network::backward(const Tensor& grad_logits) {
  if (!ready_for_backward_) throw StateError("backward requires a preceding train-mode forward pass");
  Tensor g = head_.backward(grad_logits);
  if (aux_width_ > 0) {
    Tensor trunk_grad({g.batch(), trunk_width_});
    trunk_grad.flat() = g.flat().leftCols(trunk_width_);
    g = std::move(trunk_grad);
  }
  Tensor out = trunk_.empty() ? g : trunk_.backward(std::move(g));
  if (trunk_.empty()) {
    Shape s{out.batch()};
    s.insert(s.end(), input_shape_.begin(), input_shape_.end());
    out.shape = s;
  }
  ready_for_backward_ = false;
  return out;
}

const Tensor& Network::tap_output() const {
  if (!have_tap_) throw StateError("network has no tap or no forward pass was run");
  return tap_output_;
}

Tensor Network::embed(const Tensor& x, const Tensor* aux) {
  forward(x, Mode::Eval, aux);
  return tap_output();
}

std::vector<Parameter*> Network::parameters() {
  auto out = trunk_.parameters();
  for (Parameter* p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> Network::trainable_parameters() {
  std::vector<Parameter*> out;
  for (Parameter* p : parameters())
    if (p->trainable) out.push_back(p);
  return out;
}

void Network::zero_grad() {
  for (Parameter* p : parameters()) p->grad.setZero();
}

Eigen::Index Network::num_trainable() {
  Eigen::Index n = 0;
  for (Parameter* p : trainable_parameters()) n += p->value.size();
  return n;
}

namespace {
template <typename F>
void for_each_dropout(Sequential& seq, F&& f) {
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (auto* d = dynamic_cast<Dropout*>(&seq.at(i))) f(*d, i);
}
}  // namespace

void Network::set_dropout_frozen(bool frozen) {
  for_each_dropout(trunk_, [&](Dropout& d, std::size_t) { d.set_frozen(frozen); });
  for_each_dropout(head_, [&](Dropout& d, std::size_t) { d.set_frozen(frozen); });
}

void Network::reseed_dropout(std::uint64_t seed) {
  for_each_dropout(trunk_, [&](Dropout& d, std::size_t i) { d.reseed(derive_seed(seed, "dropout.trunk", i)); });
  for_each_dropout(head_, [&](Dropout& d, std::size_t i) { d.reseed(derive_seed(seed, "dropout.head", i)); });
}

}  // namespace wasncal::nn
