#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "eegtl/tensor.hpp"

namespace eegtl {

/// Trainable parameters receive gradients; buffers (batch-norm running
/// statistics) are state that the optimizer never touches.
enum class EntryKind { parameter, buffer };

template <class T>
struct ParamEntry {
  BasicTensor<T> tensor;
  EntryKind kind = EntryKind::parameter;
};

/// Adam moments for one entry.
template <class T>
struct MomentState {
  std::vector<T> first;
  std::vector<T> second;
};

/// Named tensors with freeze flags and optimizer state.
///
/// Invariants: the frozen set only names existing entries, and optimizer
/// state is never kept for frozen entries.
template <class T>
class BasicParamStore {
 public:
  using Tensor = BasicTensor<T>;

  void add(const std::string& name, Tensor tensor, EntryKind kind = EntryKind::parameter);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  EntryKind kind(const std::string& name) const;

  const std::map<std::string, ParamEntry<T>>& entries() const { return entries_; }
  std::vector<std::string> names() const;

  /// Replaces the frozen set; unknown names throw ValidationError.
  void set_frozen(const std::set<std::string>& names);
  void freeze(const std::string& name);
  void unfreeze_all() { frozen_.clear(); }
  bool is_frozen(const std::string& name) const { return frozen_.count(name) != 0; }
  const std::set<std::string>& frozen() const { return frozen_; }

  /// Removes an entry together with its frozen flag and optimizer state.
  void erase(const std::string& name);

  /// Number of scalar values in non-frozen parameter entries.
  std::size_t count_trainable() const;
  std::size_t count_parameters() const;

  void zero_grad();

  std::map<std::string, MomentState<T>>& optimizer_state() { return moments_; }
  const std::map<std::string, MomentState<T>>& optimizer_state() const { return moments_; }
  std::uint64_t step_count() const { return steps_; }
  void set_step_count(std::uint64_t steps) { steps_ = steps; }
  void reset_optimizer() {
    moments_.clear();
    steps_ = 0;
  }

  /// Values only; frozen flags are carried, optimizer state and gradients are not.
  template <class U>
  BasicParamStore<U> cast() const {
    BasicParamStore<U> out;
    for (const auto& [name, entry] : entries_) out.add(name, entry.tensor.template cast<U>(), entry.kind);
    out.set_frozen(frozen_);
    return out;
  }

  /// True when every entry has the same name, kind, shape and bit pattern.
  bool values_identical(const BasicParamStore& other) const;

 private:
  std::map<std::string, ParamEntry<T>> entries_;
  std::set<std::string> frozen_;
  std::map<std::string, MomentState<T>> moments_;
  std::uint64_t steps_ = 0;
};

using ParamStore = BasicParamStore<float>;

extern template class BasicParamStore<float>;
extern template class BasicParamStore<double>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of every non-frozen parameter entry.
/// Frozen entries and buffers are left untouched; the step counter advances once.
/// Throws ValidationError when a non-frozen parameter has no gradient.
void adam_step(ParamStore& params, const AdamConfig& config);

}  // namespace eegtl
