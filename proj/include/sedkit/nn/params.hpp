#pragma once

// Named views over a model's parameter tensors, in registration order, plus
// the checkpoint container (named-tensor archive: name, shape, raw little-
// endian doubles).

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sedkit/binio.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
  bool trainable = true;  // false for batch-norm running statistics
};

class ParamSet {
 public:
  void add(const std::string& name, Tensor& tensor, bool trainable = true) {
    for (const auto& it : items_)
      if (it.name == name) throw ConfigError("duplicate parameter name: " + name);
    items_.push_back(ParamRef{name, &tensor, trainable});
  }

  std::size_t size() const { return items_.size(); }
  const std::vector<ParamRef>& items() const { return items_; }
  std::vector<ParamRef>& items() { return items_; }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void zero_grad() {
    for (auto& it : items_) it.tensor->zero_grad();
  }

 private:
  std::vector<ParamRef> items_;
};

// teacher <- decay * teacher + (1 - decay) * student, name by name.
inline void ema_update(ParamSet& teacher, const ParamSet& student, double decay = 0.999) {
  if (teacher.size() != student.size()) throw ConfigError("ema_update: parameter sets differ in size");
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    auto& t = teacher.items()[i];
    const auto& s = student.items()[i];
    if (t.name != s.name) throw ConfigError("ema_update: name mismatch: " + t.name + " vs " + s.name);
    if (t.tensor->shape != s.tensor->shape) throw ConfigError("ema_update: shape mismatch for " + t.name);
    for (std::size_t k = 0; k < t.tensor->data.size(); ++k)
      t.tensor->data[k] = decay * t.tensor->data[k] + (1.0 - decay) * s.tensor->data[k];
  }
}

inline void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("SEDC", 4);
  binio::write_le<std::uint32_t>(os, 1);
  binio::write_le<std::uint64_t>(os, params.size());
  for (const auto& it : params) {
    binio::write_string(os, it.name);
    binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(it.tensor->ndim()));
    for (auto d : it.tensor->shape) binio::write_le<std::int64_t>(os, d);
    for (double v : it.tensor->data) binio::write_le<double>(os, v);
  }
  if (!os) throw IoError("failed writing " + path);
}

// Raw archive contents, for loading into a freshly built model or for
// inspecting shapes before construction.
inline std::map<std::string, Tensor> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  binio::expect_tag(is, "SEDC");
  if (binio::read_le<std::uint32_t>(is) != 1) throw IoError("unsupported checkpoint version in " + path);
  const auto count = binio::read_le<std::uint64_t>(is);
  std::map<std::string, Tensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = binio::read_string(is);
    const auto ndim = binio::read_le<std::uint32_t>(is);
    Shape shape(ndim);
    for (auto& d : shape) d = binio::read_le<std::int64_t>(is);
    Tensor t(shape);
    for (double& v : t.data) v = binio::read_le<double>(is);
    out.emplace(name, std::move(t));
  }
  return out;
}

inline void load_checkpoint(const std::string& path, ParamSet& params) {
  auto archive = read_checkpoint(path);
  for (auto& it : params) {
    auto found = archive.find(it.name);
    if (found == archive.end()) throw ConfigError("checkpoint missing parameter " + it.name);
    if (found->second.shape != it.tensor->shape)
      throw ConfigError("checkpoint shape mismatch for " + it.name + ": " + shape_str(found->second.shape) +
                        " vs " + shape_str(it.tensor->shape));
    it.tensor->data = found->second.data;
  }
}

}  // namespace sedkit
