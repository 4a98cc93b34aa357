#include "hine/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hine/error.hpp"
#include "text_util.hpp"

namespace hine {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_uint(std::istream& in, int bytes, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), bytes)) throw DataError("'" + path + "': truncated binary file");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path) { return get_uint(in, 8, path); }
std::uint32_t get_u32(std::istream& in, const std::string& path) {
  return static_cast<std::uint32_t>(get_uint(in, 4, path));
}
float get_f32(std::istream& in, const std::string& path) { return std::bit_cast<float>(get_u32(in, path)); }
double get_f64(std::istream& in, const std::string& path) { return std::bit_cast<double>(get_u64(in, path)); }

void finish(std::ostream& out, const std::string& path) {
  out.flush();
  if (!out) throw DataError("write failed for '" + path + "'");
}

bool has_whitespace(const std::string& s) { return s.find_first_of(" \t\r\n") != std::string::npos; }

constexpr char kTransformMagic[8] = {'H', 'I', 'N', 'E', 'T', 'R', 'F', '1'};

}  // namespace

EmbeddingSet make_embedding_set(const HinGraph& g, const EmbeddingTable& table) {
  if (table.rows() != g.num_nodes()) throw ConfigError("embedding table does not match graph size");
  return {g.node_names().names(), table};
}

void write_embeddings_text(const EmbeddingSet& e, const std::string& path) {
  auto out = detail::open_out(path);
  out << e.size() << ' ' << e.dim() << '\n';
  char buf[32];
  for (std::size_t v = 0; v < e.size(); ++v) {
    if (has_whitespace(e.names[v]))
      throw DataError("node name '" + e.names[v] + "' contains whitespace; cannot write text embeddings");
    out << e.names[v];
    for (double x : e.vectors.row(v)) {
      std::snprintf(buf, sizeof buf, " %.6g", x);
      out << buf;
    }
    out << '\n';
  }
  finish(out, path);
}

EmbeddingSet read_embeddings_text(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw DataError("'" + path + "': empty embedding file");
  std::size_t n = 0, d = 0;
  {
    std::istringstream header(line);
    if (!(header >> n >> d)) throw ParseError(path, 1, "expected header `|V| d`");
  }
  EmbeddingSet e;
  e.vectors = EmbeddingTable(n, d);
  e.names.reserve(n);
  while (e.names.size() < n && std::getline(in, line)) {
    ++lineno;
    std::istringstream row(line);
    std::string name;
    if (!(row >> name)) throw ParseError(path, lineno, "missing node name");
    auto dst = e.vectors.row(e.names.size());
    for (std::size_t i = 0; i < d; ++i) {
      std::string tok;
      if (!(row >> tok)) throw ParseError(path, lineno, "expected " + std::to_string(d) + " values");
      char* end = nullptr;
      dst[i] = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) throw ParseError(path, lineno, "bad number '" + tok + "'");
    }
    std::string extra;
    if (row >> extra) throw ParseError(path, lineno, "more than " + std::to_string(d) + " values");
    e.names.push_back(std::move(name));
  }
  if (e.names.size() != n)
    throw DataError("'" + path + "': header promises " + std::to_string(n) + " rows, found " +
                    std::to_string(e.names.size()));
  return e;
}

void write_embeddings_binary(const EmbeddingSet& e, const std::string& path) {
  {
    auto out = detail::open_out(path, std::ios::binary);
    put_u64(out, e.size());
    put_u64(out, e.dim());
    for (double x : e.vectors.data()) put_f32(out, static_cast<float>(x));
    finish(out, path);
  }
  auto names = detail::open_out(path + ".names");
  for (const auto& n : e.names) names << n << '\n';
  finish(names, path + ".names");
}

EmbeddingSet read_embeddings_binary(const std::string& path) {
  auto in = detail::open_in(path, std::ios::binary);
  std::uint64_t n = get_u64(in, path);
  std::uint64_t d = get_u64(in, path);
  EmbeddingSet e;
  e.vectors = EmbeddingTable(n, d);
  for (double& x : e.vectors.data()) x = get_f32(in, path);
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("'" + path + "': trailing bytes after rows");
  if (std::filesystem::exists(path + ".names")) {
    auto names = detail::open_in(path + ".names");
    std::string line;
    while (e.names.size() < n && std::getline(names, line)) e.names.push_back(std::string(detail::strip_cr(line)));
    if (e.names.size() != n) throw DataError("'" + path + ".names': expected " + std::to_string(n) + " names");
  } else {
    for (std::uint64_t v = 0; v < n; ++v) e.names.push_back(std::to_string(v));
  }
  return e;
}

EmbeddingSet read_embeddings(const std::string& path) {
  if (std::filesystem::path(path).extension() == ".bin") return read_embeddings_binary(path);
  return read_embeddings_text(path);
}

void write_embedding_checkpoint(const EmbeddingTable& table, const std::string& path) {
  auto out = detail::open_out(path, std::ios::binary);
  put_u64(out, table.rows());
  put_u64(out, table.dim());
  for (double x : table.data()) put_f64(out, x);
  finish(out, path);
}

EmbeddingTable read_embedding_checkpoint(const std::string& path) {
  auto in = detail::open_in(path, std::ios::binary);
  std::uint64_t n = get_u64(in, path);
  std::uint64_t d = get_u64(in, path);
  EmbeddingTable t(n, d);
  for (double& x : t.data()) x = get_f64(in, path);
  return t;
}

void write_transforms(const Model& model, const std::string& path) {
  auto out = detail::open_out(path, std::ios::binary);
  out.write(kTransformMagic, sizeof kTransformMagic);
  put_u32(out, kTransformFormatVersion);
  const auto& arch = model.architecture();
  put_u64(out, model.num_relations());
  put_u64(out, arch.dim);
  put_u64(out, arch.hidden);
  put_u64(out, arch.hidden_layers);
  for (std::size_t e = 0; e < model.num_relations(); ++e) {
    for (const auto& layer : model.transform(static_cast<EdgeTypeId>(e)).layers()) {
      for (double w : layer.weight) put_f64(out, w);
      for (double b : layer.bias) put_f64(out, b);
    }
  }
  finish(out, path);
}

void read_transforms(Model& model, const std::string& path) {
  auto in = detail::open_in(path, std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kTransformMagic, 8) != 0)
    throw DataError("'" + path + "': not a transform checkpoint");
  auto version = get_u32(in, path);
  if (version != kTransformFormatVersion)
    throw DataError("'" + path + "': unsupported transform format version " + std::to_string(version));
  const auto& arch = model.architecture();
  auto relations = get_u64(in, path);
  auto dim = get_u64(in, path);
  auto hidden = get_u64(in, path);
  auto layers = get_u64(in, path);
  if (relations != model.num_relations() || dim != arch.dim || hidden != arch.hidden || layers != arch.hidden_layers)
    throw DataError("'" + path + "': transform shape does not match the model");
  for (std::size_t e = 0; e < model.num_relations(); ++e) {
    for (auto& layer : model.transform(static_cast<EdgeTypeId>(e)).layers()) {
      for (double& w : layer.weight) w = get_f64(in, path);
      for (double& b : layer.bias) b = get_f64(in, path);
    }
  }
}

}  // namespace hine
