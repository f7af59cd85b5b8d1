#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vsum/adversarial.hpp"
#include "vsum/common.hpp"
#include "vsum/csnet.hpp"
#include "vsum/nets.hpp"
#include "vsum/tensor_file.hpp"

namespace vsum::checkpoint {

namespace fs = std::filesystem;

// A checkpoint is a directory of f64 `.ten` tensors, one per named parameter,
// plus params.json carrying the tensor list and caller-supplied metadata
// (config echo, seed, creation info).
inline void save(const fs::path& dir, csnet::CSNetParams& scorer,
                 adversarial::VaeGanParams& vae, const nlohmann::ordered_json& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint dir: " + dir.string());

  nets::ParamSet ps;
  scorer.collect(ps, "scorer");
  vae.collect(ps, "vae");

  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Matrix& m = *ps.tensors[i];
    io::write_tensor(dir / (ps.names[i] + ".ten"), io::from_matrix_f64(m));
    tensors[ps.names[i]] = {{"rows", m.rows()}, {"cols", m.cols()}};
  }

  nlohmann::ordered_json j;
  j["format"] = "vsum-checkpoint";
  j["version"] = 1;
  j["tensors"] = tensors;
  j["meta"] = meta;
  std::ofstream out(dir / "params.json");
  if (!out) throw IoError("cannot write params.json in " + dir.string());
  out << j.dump(2) << "\n";
}

// Loads tensors by name into pre-shaped parameter structs (built from the
// same configs that trained them). Returns the stored metadata.
inline nlohmann::json load(const fs::path& dir, csnet::CSNetParams& scorer,
                           adversarial::VaeGanParams& vae) {
  const fs::path manifest = dir / "params.json";
  std::ifstream in(manifest);
  if (!in) throw IoError("checkpoint not found: " + manifest.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("params.json: " + std::string(e.what()));
  }
  if (!j.contains("format") || j["format"] != "vsum-checkpoint")
    throw FormatError("params.json: not a checkpoint manifest");

  nets::ParamSet ps;
  scorer.collect(ps, "scorer");
  vae.collect(ps, "vae");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const fs::path tp = dir / (ps.names[i] + ".ten");
    if (!fs::exists(tp)) throw FormatError("checkpoint missing tensor: " + ps.names[i]);
    Matrix m = io::to_matrix_f64(io::read_tensor(tp), ps.names[i]);
    if (m.rows() != ps.tensors[i]->rows() || m.cols() != ps.tensors[i]->cols())
      throw ShapeError("checkpoint tensor " + ps.names[i] + " has wrong shape");
    *ps.tensors[i] = std::move(m);
  }
  return j.contains("meta") ? j["meta"] : nlohmann::json::object();
}

inline bool exists(const fs::path& dir) { return fs::exists(dir / "params.json"); }

// Metadata only; used to reconstruct configs before shaping parameters.
inline nlohmann::json read_meta(const fs::path& dir) {
  std::ifstream in(dir / "params.json");
  if (!in) throw IoError("checkpoint not found: " + (dir / "params.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("params.json: " + std::string(e.what()));
  }
  if (!j.contains("format") || j["format"] != "vsum-checkpoint")
    throw FormatError("params.json: not a checkpoint manifest");
  return j.contains("meta") ? j["meta"] : nlohmann::json::object();
}

}  // namespace vsum::checkpoint
