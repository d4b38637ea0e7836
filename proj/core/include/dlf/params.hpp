#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dlf/tape.hpp"

namespace dlf {

// A named, trainable tensor. Names are '.'-separated paths, unique within a
// store, e.g. "lfa.branch_V.layer0.attn.wq.weight".
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape, zeroed
};

// Owns all parameters of a model in creation order. Creation order is the
// deterministic iteration order for init, optimizer steps and checkpoints.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& create(const std::string& name, Shape shape);
  Parameter* find(const std::string& name);
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }

  void zero_grads();
  int64_t scalar_count() const;

  // Sum of squared gradients over every parameter (for norm clipping).
  double grad_sq_norm() const;

  // Deep copy / restore of all values (early-stopping snapshots).
  std::vector<Tensor> snapshot_values() const;
  void restore_values(const std::vector<Tensor>& snapshot);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, size_t> by_name_;
};

// Xavier-uniform init for weight matrices; fan counts from the shape.
void init_xavier(Tensor& t, Rng& rng, int fan_in, int fan_out);

// One forward pass: owns the tape, the train/eval switch and the dropout RNG,
// and caches one tape leaf per parameter so that parameter reuse (shared
// encoders, re-encoding) accumulates gradients on a single node.
class Forward {
 public:
  explicit Forward(bool training = false, Rng* rng = nullptr)
      : training(training), rng(rng) {}

  Tape tape;
  bool training;
  Rng* rng;

  ValueId use(Parameter& p);

  // Runs tape.backward(loss), then writes d(loss)/d(param) into every
  // parameter of the store. Parameters the loss never touched get zero.
  void backward_into_params(ValueId loss, ParameterStore& store);

 private:
  std::unordered_map<Parameter*, ValueId> leaves_;
};

}  // namespace dlf
