#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hine/graph.hpp"

namespace hine {

using Signature = std::vector<EdgeTypeId>;

// (first, e_1..e_m, last) with intermediate nodes dropped. m = 1 is an edge triple.
struct ChainSample {
  NodeId first = 0;
  Signature relations;
  NodeId last = 0;

  std::size_t length() const noexcept { return relations.size(); }
  friend bool operator==(const ChainSample&, const ChainSample&) = default;
  friend auto operator<=>(const ChainSample&, const ChainSample&) = default;
};

struct TypedWalk {
  std::vector<NodeId> nodes;
  std::vector<EdgeTypeId> relations;  // nodes.size() - 1 entries

  friend bool operator==(const TypedWalk&, const TypedWalk&) = default;
};

struct SamplerConfig {
  std::size_t walks_per_node = 100;
  std::size_t max_walk_length = 50;
  std::size_t max_chain_length = 3;
  std::size_t min_count = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

// Uniform draws over the edge multiset; throws DataError on an edge-less graph.
std::vector<ChainSample> sample_edge_triples(const HinGraph& g, std::size_t count, std::uint64_t seed);

// Every edge exactly once, in CSR order.
std::vector<ChainSample> all_edge_triples(const HinGraph& g);

// Walk `round` started at `start`. Each step is uniform over the out-edge
// multiset; stops at max_walk_length nodes or at a sink. The RNG is seeded
// from (seed, round, start) so walks are independent of generation order.
TypedWalk random_walk(const HinGraph& g, NodeId start, std::size_t round, const SamplerConfig& cfg);

// walks_per_node rounds over all nodes, round-major. OpenMP-parallel; output
// order and content do not depend on the thread count.
std::vector<TypedWalk> random_walks(const HinGraph& g, const SamplerConfig& cfg);

// Streams the same sequence as random_walks without materializing it.
void for_each_random_walk(const HinGraph& g, const SamplerConfig& cfg,
                          const std::function<void(const TypedWalk&)>& fn);

// All contiguous sub-chains of 1..c relations, grouped by length, then by start.
std::vector<ChainSample> walk_to_chain_samples(const TypedWalk& walk, std::size_t max_chain);
void append_chain_samples(const TypedWalk& walk, std::size_t max_chain, std::vector<ChainSample>& out);

// Σ_{m=1..c} max(0, n - m) for an n-node walk.
std::size_t chain_sample_count(std::size_t walk_nodes, std::size_t max_chain);

// Random instances of the pattern, endpoints only. Starts and steps are uniform
// over nodes/edges that can still complete the pattern; returns an empty
// vector when the pattern has no instance.
std::vector<ChainSample> metapath_instances(const HinGraph& g, const MetaPathPattern& pattern,
                                            std::size_t count, std::uint64_t seed,
                                            std::size_t max_chain = 0);

// Drops samples whose first or last node occurs fewer than min_count times as
// an endpoint across the corpus.
std::vector<ChainSample> apply_min_count(std::span<const ChainSample> samples, std::size_t min_count);

// Sample file rows: `first<TAB>e_1,e_2,...<TAB>last`.
void write_samples(const HinGraph& g, std::span<const ChainSample> samples, const std::string& path);
std::vector<ChainSample> read_samples(const HinGraph& g, const std::string& path);

// ---------------------------------------------------------------------------
// Ride-order trajectories.

enum class DayPeriod : std::uint8_t {
  kPeakMorning,
  kDaytime,
  kPeakEvening,
  kDuskToMidnight,
  kMidnightToMorning,
};

// Five daily periods x {weekday, weekend}. Each period starts at an hour of
// day; the periods must partition [0, 24).
struct TimeBucketRule {
  // Start hour of each DayPeriod, in enum order.
  std::array<int, 5> start_hour{7, 10, 17, 20, 0};

  static constexpr std::size_t kNumRelations = 10;

  void validate() const;
  DayPeriod period_of(int hour, int minute) const;
  // Relation index in [0, 10): period * 2 + (weekend ? 1 : 0).
  std::size_t bucket(int hour, int minute, bool weekend) const;
  static std::string relation_name(std::size_t bucket);
  static std::vector<std::string> relation_names();
};

struct Timestamp {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;

  std::int64_t day_number() const;  // days since 1970-01-01
  bool weekend() const;
  std::int64_t seconds() const;     // monotone within and across days
};

// ISO 8601 `YYYY-MM-DD[T ]HH:MM[:SS]`, optional trailing zone designator
// (ignored: the wall-clock time is taken as local). Returns false when malformed.
bool parse_timestamp(std::string_view text, Timestamp& out);

struct RideOrder {
  std::string actor;
  std::string timestamp;
  NodeId src = 0;
  NodeId dst = 0;
};

struct TrajectoryStats {
  std::size_t orders = 0;
  std::size_t skipped_timestamps = 0;
  std::size_t walks = 0;
};

// Per actor and calendar day, time-sorted orders with dst_i == src_{i+1}
// chain into one walk; relation ids are TimeBucketRule::bucket values.
std::vector<TypedWalk> trajectory_to_walks(std::span<const RideOrder> orders, const TimeBucketRule& rule,
                                           TrajectoryStats* stats = nullptr);

struct TrajectoryData {
  std::vector<RideOrder> orders;
  NameTable nodes;
  std::size_t malformed_rows = 0;
};

// Rows `actor<TAB>iso8601_timestamp<TAB>src<TAB>dst`. Node ids are assigned by
// first appearance (src before dst).
TrajectoryData load_trajectories(const std::string& path);

// One edge per order (with a parseable timestamp), typed by its time bucket.
// All ten relation types are registered, in bucket order, so edge-type ids
// equal bucket indices.
HinGraph build_order_graph(const TrajectoryData& data, const TimeBucketRule& rule);

}  // namespace hine
