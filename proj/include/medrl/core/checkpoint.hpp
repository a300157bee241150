#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "medrl/core/tensor.hpp"

namespace medrl {

/// Versioned binary container of named matrices plus a free-form metadata
/// string (config snapshot, schema name, ...). Values are stored as 64-bit
/// reals regardless of the run precision so checkpoints are interchangeable
/// between modes.
struct Checkpoint {
  static constexpr char kMagic[8] = {'M', 'R', 'L', 'C', 'K', 'P', 'T', '1'};

  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
  std::string meta;

  bool has(const std::string& name) const {
    for (const auto& [k, v] : tensors)
      if (k == name) return true;
    return false;
  }

  const Eigen::MatrixXd& get(const std::string& name) const {
    for (const auto& [k, v] : tensors)
      if (k == name) return v;
    throw std::runtime_error("Checkpoint: missing tensor " + name);
  }

  void put(const std::string& name, Eigen::MatrixXd m) { tensors.emplace_back(name, std::move(m)); }

  template <typename S>
  void put_params(const ParamMap<S>& params, const std::string& prefix = "") {
    for (const auto& [name, t] : params.items) put(prefix + name, t.value().template cast<double>());
  }

  template <typename S>
  void load_params(ParamMap<S>& params, const std::string& prefix = "") const {
    for (auto& [name, t] : params.items) {
      const Eigen::MatrixXd& m = get(prefix + name);
      if (m.rows() != t.rows() || m.cols() != t.cols())
        throw std::runtime_error("Checkpoint: shape mismatch for " + prefix + name);
      t.mutable_value() = m.cast<S>();
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("Checkpoint::save: cannot open " + path);
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, tensors.size());
    for (const auto& [name, m] : tensors) {
      write_string(out, name);
      write_u64(out, static_cast<std::uint64_t>(m.rows()));
      write_u64(out, static_cast<std::uint64_t>(m.cols()));
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
    write_string(out, meta);
    if (!out) throw std::runtime_error("Checkpoint::save: write failed for " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("Checkpoint::load: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, 8) != std::string(kMagic, 8))
      throw std::runtime_error("Checkpoint::load: bad magic in " + path);
    Checkpoint ck;
    const std::uint64_t count = read_u64(in);
    ck.tensors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::string name = read_string(in);
      const auto rows = static_cast<Eigen::Index>(read_u64(in));
      const auto cols = static_cast<Eigen::Index>(read_u64(in));
      Eigen::MatrixXd m(rows, cols);
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
      if (!in) throw std::runtime_error("Checkpoint::load: truncated tensor data in " + path);
      ck.tensors.emplace_back(std::move(name), std::move(m));
    }
    ck.meta = read_string(in);
    return ck;
  }

 private:
  static void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("Checkpoint: truncated stream");
    return v;
  }
  static void write_string(std::ofstream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  static std::string read_string(std::ifstream& in) {
    const std::uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("Checkpoint: truncated string");
    return s;
  }
};

}  // namespace medrl
