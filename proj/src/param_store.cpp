#include "eegtl/param_store.hpp"

#include <cmath>
#include <cstring>

namespace eegtl {

template <class T>
void BasicParamStore<T>::add(const std::string& name, Tensor tensor, EntryKind kind) {
  if (contains(name)) throw ValidationError("parameter '" + name + "' already exists");
  entries_.emplace(name, ParamEntry<T>{std::move(tensor), kind});
}

template <class T>
typename BasicParamStore<T>::Tensor& BasicParamStore<T>::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return it->second.tensor;
}

template <class T>
const typename BasicParamStore<T>::Tensor& BasicParamStore<T>::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return it->second.tensor;
}

template <class T>
EntryKind BasicParamStore<T>::kind(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return it->second.kind;
}

template <class T>
std::vector<std::string> BasicParamStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) out.push_back(name);
  return out;
}

template <class T>
void BasicParamStore<T>::set_frozen(const std::set<std::string>& names) {
  for (const auto& name : names) {
    if (!contains(name)) throw ValidationError("cannot freeze unknown parameter '" + name + "'");
  }
  frozen_ = names;
  for (const auto& name : frozen_) moments_.erase(name);
}

template <class T>
void BasicParamStore<T>::freeze(const std::string& name) {
  if (!contains(name)) throw ValidationError("cannot freeze unknown parameter '" + name + "'");
  frozen_.insert(name);
  moments_.erase(name);
}

template <class T>
void BasicParamStore<T>::erase(const std::string& name) {
  entries_.erase(name);
  frozen_.erase(name);
  moments_.erase(name);
}

template <class T>
std::size_t BasicParamStore<T>::count_trainable() const {
  std::size_t total = 0;
  for (const auto& [name, entry] : entries_) {
    if (entry.kind == EntryKind::parameter && !is_frozen(name)) total += entry.tensor.size();
  }
  return total;
}

template <class T>
std::size_t BasicParamStore<T>::count_parameters() const {
  std::size_t total = 0;
  for (const auto& [name, entry] : entries_) {
    if (entry.kind == EntryKind::parameter) total += entry.tensor.size();
  }
  return total;
}

template <class T>
void BasicParamStore<T>::zero_grad() {
  for (auto& [name, entry] : entries_) {
    if (entry.kind == EntryKind::parameter) entry.tensor.zero_grad();
  }
}

template <class T>
bool BasicParamStore<T>::values_identical(const BasicParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.kind != b->second.kind) return false;
    const auto& ta = a->second.tensor;
    const auto& tb = b->second.tensor;
    if (ta.shape() != tb.shape()) return false;
    if (std::memcmp(ta.data().data(), tb.data().data(), ta.size() * sizeof(T)) != 0) return false;
  }
  return true;
}

template class BasicParamStore<float>;
template class BasicParamStore<double>;

void adam_step(ParamStore& params, const AdamConfig& config) {
  for (const auto& [name, entry] : params.entries()) {
    if (entry.kind != EntryKind::parameter || params.is_frozen(name)) continue;
    if (!entry.tensor.has_grad()) {
      throw ValidationError("adam_step: parameter '" + name + "' has no gradient");
    }
  }
  const std::uint64_t step = params.step_count() + 1;
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  auto& moments = params.optimizer_state();
  for (const auto& name : params.names()) {
    if (params.kind(name) != EntryKind::parameter || params.is_frozen(name)) continue;
    Tensor& tensor = params.at(name);
    MomentState<float>& state = moments[name];
    if (state.first.size() != tensor.size()) {
      state.first.assign(tensor.size(), 0.0f);
      state.second.assign(tensor.size(), 0.0f);
    }
    auto values = tensor.data();
    auto grad = tensor.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      const double m = config.beta1 * state.first[i] + (1.0 - config.beta1) * g;
      const double v = config.beta2 * state.second[i] + (1.0 - config.beta2) * g * g;
      state.first[i] = static_cast<float>(m);
      state.second[i] = static_cast<float>(v);
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      values[i] = static_cast<float>(values[i] - config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon));
    }
  }
  params.set_step_count(step);
}

}  // namespace eegtl
