#include <algorithm>
#include <charconv>
#include <chrono>
#include <numeric>

#include "hine/error.hpp"
#include "hine/sampler.hpp"
#include "text_util.hpp"

namespace hine {

namespace {

constexpr std::array<const char*, 5> kPeriodNames{
    "peak-morning", "daytime", "peak-evening", "dusk-to-midnight", "midnight-to-morning"};

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void TimeBucketRule::validate() const {
  for (int h : start_hour)
    if (h < 0 || h > 23) throw ConfigError("time bucket start hours must lie in [0, 24)");
  // Periods must follow each other around the clock in enum order.
  int span = 0;
  for (std::size_t p = 0; p < 5; ++p) {
    int delta = (start_hour[(p + 1) % 5] - start_hour[p] + 24) % 24;
    if (delta == 0) throw ConfigError("time bucket periods must have distinct start hours");
    span += delta;
  }
  if (span != 24) throw ConfigError("time bucket periods must partition the day in order");
}

DayPeriod TimeBucketRule::period_of(int hour, int /*minute*/) const {
  std::size_t best = 0;
  int best_dist = 25;
  for (std::size_t p = 0; p < 5; ++p) {
    int dist = (hour - start_hour[p] + 24) % 24;
    if (dist < best_dist) {
      best_dist = dist;
      best = p;
    }
  }
  return static_cast<DayPeriod>(best);
}

std::size_t TimeBucketRule::bucket(int hour, int minute, bool weekend) const {
  return static_cast<std::size_t>(period_of(hour, minute)) * 2 + (weekend ? 1 : 0);
}

std::string TimeBucketRule::relation_name(std::size_t bucket) {
  if (bucket >= kNumRelations) throw LookupError("time bucket " + std::to_string(bucket) + " out of range");
  return std::string(kPeriodNames[bucket / 2]) + (bucket % 2 ? "-we" : "-wd");
}

std::vector<std::string> TimeBucketRule::relation_names() {
  std::vector<std::string> out;
  for (std::size_t b = 0; b < kNumRelations; ++b) out.push_back(relation_name(b));
  return out;
}

std::int64_t Timestamp::day_number() const {
  using namespace std::chrono;
  sys_days d{year_month_day{std::chrono::year{this->year}, std::chrono::month{static_cast<unsigned>(month)},
                            std::chrono::day{static_cast<unsigned>(day)}}};
  return d.time_since_epoch().count();
}

bool Timestamp::weekend() const {
  using namespace std::chrono;
  weekday wd{sys_days{days{day_number()}}};
  return wd == Saturday || wd == Sunday;
}

std::int64_t Timestamp::seconds() const { return day_number() * 86400 + hour * 3600 + minute * 60 + second; }

bool parse_timestamp(std::string_view text, Timestamp& out) {
  text = detail::trim(text);
  if (text.size() < 16) return false;
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') || text[13] != ':') return false;
  Timestamp t;
  if (!parse_int(text.substr(0, 4), t.year) || !parse_int(text.substr(5, 2), t.month) ||
      !parse_int(text.substr(8, 2), t.day) || !parse_int(text.substr(11, 2), t.hour) ||
      !parse_int(text.substr(14, 2), t.minute))
    return false;
  std::string_view rest = text.substr(16);
  if (!rest.empty() && rest[0] == ':') {
    if (rest.size() < 3 || !parse_int(rest.substr(1, 2), t.second)) return false;
    rest.remove_prefix(3);
    if (!rest.empty() && rest[0] == '.') {
      rest.remove_prefix(1);
      while (!rest.empty() && rest[0] >= '0' && rest[0] <= '9') rest.remove_prefix(1);
    }
  }
  // Zone designator: Z or +HH[:MM] / -HH[:MM]; the wall-clock time is kept as is.
  if (!rest.empty() && rest != "Z") {
    int zone_hours = 0;
    if (rest[0] != '+' && rest[0] != '-') return false;
    if (rest.size() < 3 || !parse_int(rest.substr(1, 2), zone_hours)) return false;
  }
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{t.year}, std::chrono::month{static_cast<unsigned>(t.month)},
                     std::chrono::day{static_cast<unsigned>(t.day)}};
  if (t.month < 1 || t.day < 1 || !ymd.ok()) return false;
  if (t.hour < 0 || t.hour > 23 || t.minute < 0 || t.minute > 59 || t.second < 0 || t.second > 60) return false;
  out = t;
  return true;
}

std::vector<TypedWalk> trajectory_to_walks(std::span<const RideOrder> orders, const TimeBucketRule& rule,
                                           TrajectoryStats* stats) {
  rule.validate();
  struct Parsed {
    const RideOrder* order;
    Timestamp time;
  };
  std::vector<Parsed> parsed;
  parsed.reserve(orders.size());
  std::size_t skipped = 0;
  for (const auto& o : orders) {
    Timestamp t;
    if (!parse_timestamp(o.timestamp, t)) {
      ++skipped;
      continue;
    }
    parsed.push_back({&o, t});
  }
  std::stable_sort(parsed.begin(), parsed.end(), [](const Parsed& a, const Parsed& b) {
    if (a.order->actor != b.order->actor) return a.order->actor < b.order->actor;
    return a.time.seconds() < b.time.seconds();
  });

  std::vector<TypedWalk> walks;
  const Parsed* prev = nullptr;
  for (const auto& p : parsed) {
    bool extend = prev && prev->order->actor == p.order->actor &&
                  prev->time.day_number() == p.time.day_number() && prev->order->dst == p.order->src;
    if (!extend) {
      walks.emplace_back();
      walks.back().nodes.push_back(p.order->src);
    }
    walks.back().relations.push_back(
        static_cast<EdgeTypeId>(rule.bucket(p.time.hour, p.time.minute, p.time.weekend())));
    walks.back().nodes.push_back(p.order->dst);
    prev = &p;
  }
  if (stats) {
    stats->orders = orders.size();
    stats->skipped_timestamps = skipped;
    stats->walks = walks.size();
  }
  return walks;
}

TrajectoryData load_trajectories(const std::string& path) {
  auto in = detail::open_in(path);
  TrajectoryData data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = detail::strip_cr(line);
    if (detail::skippable(row)) continue;
    auto cols = detail::split(row, '\t');
    if (cols.size() != 4)
      throw ParseError(path, lineno, "expected 4 tab-separated columns (actor, timestamp, src, dst)");
    RideOrder o;
    o.actor = std::string(cols[0]);
    o.timestamp = std::string(cols[1]);
    o.src = data.nodes.intern(cols[2]);
    o.dst = data.nodes.intern(cols[3]);
    data.orders.push_back(std::move(o));
  }
  if (data.orders.empty()) throw DataError("'" + path + "': no trajectory rows");
  return data;
}

HinGraph build_order_graph(const TrajectoryData& data, const TimeBucketRule& rule) {
  rule.validate();
  HinGraph::Builder b;
  for (const auto& name : data.nodes.names()) b.add_node(name);
  for (const auto& rel : TimeBucketRule::relation_names()) b.add_edge_type(rel);
  for (const auto& o : data.orders) {
    Timestamp t;
    if (!parse_timestamp(o.timestamp, t)) continue;
    b.add_edge(o.src, static_cast<EdgeTypeId>(rule.bucket(t.hour, t.minute, t.weekend())), o.dst);
  }
  if (b.num_edges() == 0) throw DataError("no orders with parseable timestamps");
  return std::move(b).build();
}

}  // namespace hine
