#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "texpup/core/rng.hpp"
#include "texpup/core/tensor.hpp"

namespace texpup {

/// Named collection of trainable arrays. Names are dot-separated; the part
/// before the first dot is the group (e.g. "geom.enc.tok_w" -> group "geom").
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    auto [it, fresh] = entries_.emplace(name, std::move(t));
    if (!fresh) throw std::invalid_argument("paramset: duplicate name " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  const Tensor& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw std::out_of_range("paramset: unknown name " + name);
    return it->second;
  }
  Tensor& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw std::out_of_range("paramset: unknown name " + name);
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  std::vector<std::string> names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
  }

  std::set<std::string> groups() const {
    std::set<std::string> g;
    for (const auto& [k, v] : entries_)
      g.insert(k.substr(0, k.find('.')));
    return g;
  }

  std::size_t count() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : entries_) n += v.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& [k, v] : entries_)
      if (!v.all_finite()) return false;
    return true;
  }

  /// Same names, zero-filled tensors. Used for gradient accumulators.
  static ParamSet zeros_like(const ParamSet& src) {
    ParamSet out;
    for (const auto& [k, v] : src.entries_) out.add(k, Tensor(v.shape));
    return out;
  }

  /// FNV-1a over names and raw f64 payloads; detects any parameter mutation.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
      const unsigned char* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& [k, v] : entries_) {
      mix(k.data(), k.size());
      mix(v.data.data(), v.data.size() * sizeof(double));
    }
    return h;
  }

  std::uint64_t hash_group(const std::string& prefix) const {
    ParamSet sub;
    for (const auto& [k, v] : entries_)
      if (k.rfind(prefix, 0) == 0) sub.add(k, v);
    return sub.hash();
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Tensor> entries_;
};

/// Fan-in-scaled uniform init for a [fan_out x fan_in] weight (or conv
/// weight with fan_in = C_in * kh * kw).
inline Tensor init_weight(std::vector<std::size_t> shape, std::size_t fan_in,
                          Rng& rng) {
  Tensor t(std::move(shape));
  double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace texpup
