#include "dlf/params.hpp"

#include <cmath>

namespace dlf {

Parameter& ParameterStore::create(const std::string& name, Shape shape) {
  if (by_name_.count(name)) throw Error("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(shape);
  p->grad = Tensor(std::move(shape));
  by_name_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : params_[it->second].get();
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p->grad.fill(0.0);
}

int64_t ParameterStore::scalar_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

double ParameterStore::grad_sq_norm() const {
  double s = 0.0;
  for (const auto& p : params_) {
    for (int64_t i = 0; i < p->grad.size(); ++i) s += p->grad[i] * p->grad[i];
  }
  return s;
}

std::vector<Tensor> ParameterStore::snapshot_values() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore_values(const std::vector<Tensor>& snapshot) {
  if (snapshot.size() != params_.size()) {
    throw Error("restore_values: snapshot has " + std::to_string(snapshot.size()) +
                " tensors, store has " + std::to_string(params_.size()));
  }
  for (size_t i = 0; i < params_.size(); ++i) {
    if (!snapshot[i].same_shape(params_[i]->value)) {
      throw Error("restore_values: shape mismatch for " + params_[i]->name);
    }
    params_[i]->value = snapshot[i];
  }
}

void init_xavier(Tensor& t, Rng& rng, int fan_in, int fan_out) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  t.round_to_precision();
}

ValueId Forward::use(Parameter& p) {
  auto it = leaves_.find(&p);
  if (it != leaves_.end()) return it->second;
  ValueId id = tape.leaf(p.value);
  leaves_.emplace(&p, id);
  return id;
}

void Forward::backward_into_params(ValueId loss, ParameterStore& store) {
  tape.backward(loss);
  store.zero_grads();
  for (const auto& [param, id] : leaves_) {
    if (!tape.gradient_touched(id)) continue;
    param->grad = tape.gradient(id);
  }
}

}  // namespace dlf
