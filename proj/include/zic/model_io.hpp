#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "zic/daezic.hpp"
#include "zic/hash.hpp"

namespace zic {

/// Model file layout:
///
///   ZICMODEL 1\n
///   key=value lines (architecture, its hash, config digest, spec fields)
///   end\n
///   u32 tensor count, then per tensor u32 rows, u32 cols,
///   then all tensors' values row-major as little-endian f64.
///
/// Tensors are the trainable parameters in DaeZicModel::params() order,
/// followed by each batch normalization's running mean square (1x2) and its
/// initialized flag (1x1).
inline constexpr const char* kModelMagic = "ZICMODEL";
inline constexpr int kModelVersion = 1;

class ModelFormatError : public Error {
 public:
  using Error::Error;
};

/// Provenance recorded in the model header.
struct ModelInfo {
  std::string config_digest;
  std::string manifest;
};

inline std::string architecture_hash(const ModelSpec& spec) { return sha256_hex(spec.architecture()).substr(0, 16); }

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, std::size_t pos) : data_(data), pos_(pos) {}

  std::uint64_t take(int n) {
    if (pos_ + static_cast<std::size_t>(n) > data_.size()) throw ModelFormatError("model file is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::size_t pos_;
};

inline std::vector<Tensor2*> state_tensors(DaeZicModel& model, std::vector<Tensor2>& scratch) {
  std::vector<Tensor2*> out;
  for (auto* p : model.params()) out.push_back(&p->value);
  const auto norms = model.norms();
  scratch.resize(2 * norms.size());
  for (std::size_t i = 0; i < norms.size(); ++i) {
    scratch[2 * i] = norms[i]->running_ms();
    scratch[2 * i + 1] = Tensor2::Constant(1, 1, norms[i]->initialized() ? 1.0 : 0.0);
  }
  for (auto& t : scratch) out.push_back(&t);
  return out;
}

}  // namespace detail

inline std::string serialize_model(DaeZicModel& model, const ModelInfo& info = {}) {
  const ModelSpec& s = model.spec();
  std::ostringstream h;
  h << kModelMagic << ' ' << kModelVersion << '\n';
  h << "architecture=" << s.architecture() << '\n';
  h << "arch_hash=" << architecture_hash(s) << '\n';
  h << "config_digest=" << (info.config_digest.empty() ? "none" : info.config_digest) << '\n';
  h << "manifest=" << (info.manifest.empty() ? "none" : info.manifest) << '\n';
  h << "n_bits=" << s.n_bits << '\n';
  h << "p_t=" << detail::fmt_double(s.p_t) << '\n';
  h << "alpha_min=" << detail::fmt_double(s.alpha_min) << '\n';
  h << "alpha_max=" << detail::fmt_double(s.alpha_max) << '\n';
  h << "imperfect_csi=" << s.imperfect_csi << '\n';
  h << "use_shortcuts=" << s.flags.use_shortcuts << '\n';
  h << "alpha_to_subnet1=" << s.flags.alpha_to_subnet1 << '\n';
  h << "alpha_to_subnet2=" << s.flags.alpha_to_subnet2 << '\n';
  h << "alpha_to_rx=" << s.flags.alpha_to_rx << '\n';
  h << "use_subnet2=" << s.flags.use_subnet2 << '\n';
  h << "hidden=" << s.shape.hidden << '\n';
  h << "depth=" << s.shape.depth << '\n';
  h << "power_hidden=" << s.shape.power_hidden << '\n';
  h << "end\n";
  std::string out = h.str();

  std::vector<Tensor2> scratch;
  const auto tensors = detail::state_tensors(model, scratch);
  detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto* t : tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(t->rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(t->cols()));
  }
  for (const auto* t : tensors)
    for (Eigen::Index i = 0; i < t->size(); ++i) detail::put_f64(out, t->data()[i]);
  return out;
}

struct LoadedModel {
  DaeZicModel model;
  ModelInfo info;
};

inline LoadedModel deserialize_model(const std::string& data) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) throw ModelFormatError("model header is truncated");
    std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  const std::string magic = next_line();
  if (magic.rfind(kModelMagic, 0) != 0) throw ModelFormatError("not a model file (bad magic)");
  if (magic != std::string(kModelMagic) + " " + std::to_string(kModelVersion))
    throw ModelFormatError("unsupported model file version: " + magic);

  std::map<std::string, std::string> kv;
  for (std::string line = next_line(); line != "end"; line = next_line()) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ModelFormatError("malformed header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ModelFormatError("model header lacks '" + key + "'");
    return it->second;
  };
  auto get_int = [&](const std::string& key) { return std::stoi(get(key)); };
  auto get_bool = [&](const std::string& key) { return get_int(key) != 0; };

  ModelSpec s;
  try {
    s.n_bits = get_int("n_bits");
    s.p_t = std::stod(get("p_t"));
    s.alpha_min = std::stod(get("alpha_min"));
    s.alpha_max = std::stod(get("alpha_max"));
    s.imperfect_csi = get_bool("imperfect_csi");
    s.flags.use_shortcuts = get_bool("use_shortcuts");
    s.flags.alpha_to_subnet1 = get_bool("alpha_to_subnet1");
    s.flags.alpha_to_subnet2 = get_bool("alpha_to_subnet2");
    s.flags.alpha_to_rx = get_bool("alpha_to_rx");
    s.flags.use_subnet2 = get_bool("use_subnet2");
    s.shape.hidden = get_int("hidden");
    s.shape.depth = get_int("depth");
    s.shape.power_hidden = get_int("power_hidden");
  } catch (const std::logic_error&) {
    throw ModelFormatError("malformed numeric field in model header");
  }
  s.validate();
  if (get("arch_hash") != architecture_hash(s) || get("architecture") != s.architecture())
    throw ModelFormatError("architecture hash mismatch");

  LoadedModel out{DaeZicModel(s, 0), {get("config_digest"), get("manifest")}};
  std::vector<Tensor2> scratch;
  const auto tensors = detail::state_tensors(out.model, scratch);
  detail::ByteReader r(data, pos);
  if (r.u32() != tensors.size()) throw ModelFormatError("tensor count does not match the architecture");
  for (const auto* t : tensors) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (rows != t->rows() || cols != t->cols()) throw ModelFormatError("tensor shape does not match the architecture");
  }
  for (auto* t : tensors)
    for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = r.f64();
  if (!r.at_end()) throw ModelFormatError("trailing bytes after model data");

  const auto norms = out.model.norms();
  for (std::size_t i = 0; i < norms.size(); ++i) norms[i]->set_running(scratch[2 * i], scratch[2 * i + 1](0, 0) != 0.0);
  return out;
}

inline void save_model(const std::string& path, DaeZicModel& model, const ModelInfo& info = {}) {
  const std::string bytes = serialize_model(model, info);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path);
}

inline LoadedModel load_model(const std::string& path) { return deserialize_model(read_file(path)); }

}  // namespace zic
