#pragma once

#include <string>
#include <vector>

#include "hine/model.hpp"

namespace hine {

// Named embedding matrix as stored on disk.
struct EmbeddingSet {
  std::vector<std::string> names;
  EmbeddingTable vectors;

  std::size_t size() const noexcept { return names.size(); }
  std::size_t dim() const noexcept { return vectors.dim(); }
};

EmbeddingSet make_embedding_set(const HinGraph& g, const EmbeddingTable& table);

// Header `|V| d`, then `name v_1 ... v_d` with 6 significant digits.
void write_embeddings_text(const EmbeddingSet& e, const std::string& path);
EmbeddingSet read_embeddings_text(const std::string& path);

// Two little-endian uint64 counts (|V|, d) followed by float32 rows. Names go
// to a `<path>.names` sidecar, one per line.
void write_embeddings_binary(const EmbeddingSet& e, const std::string& path);
// Rows are named from the sidecar when present, else by row index.
EmbeddingSet read_embeddings_binary(const std::string& path);

// Extension-based dispatch: `.bin` is binary, anything else text.
EmbeddingSet read_embeddings(const std::string& path);

// Same two-count header, float64 rows; exact checkpoint of the training state.
void write_embedding_checkpoint(const EmbeddingTable& table, const std::string& path);
EmbeddingTable read_embedding_checkpoint(const std::string& path);

// Versioned dump of every transform: magic "HINETRF1", uint32 version,
// uint64 relations / dim / hidden / hidden_layers, then float64 weights and
// biases layer by layer.
inline constexpr std::uint32_t kTransformFormatVersion = 1;
void write_transforms(const Model& model, const std::string& path);
// Replaces the model's transforms; the architecture must match.
void read_transforms(Model& model, const std::string& path);

}  // namespace hine
