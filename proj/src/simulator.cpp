#include "nocguard/simulator.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <set>

#include "nocguard/error.hpp"
#include "nocguard/rng.hpp"

namespace nocguard {

namespace {

enum Stream : std::uint64_t {
  kBenign = 1,
  kDestination = 2,
  kBurst = 3,
  kAttack = 4,
  kVictim = 5,
  kMapping = 6,
};

constexpr int kNone = -1;

// Requests (and plain data) and responses travel in separate message classes
// so a blocked memory controller cannot wedge the responses it owes.
constexpr std::size_t kClasses = 2;

constexpr std::size_t class_of(PacketKind k) noexcept { return k == PacketKind::Response ? 1 : 0; }

struct Flit {
  std::uint32_t packet = 0;
  NodeId src = 0;
  NodeId dst = 0;
  std::uint16_t index = 0;
  std::uint16_t count = 1;
  PacketKind kind = PacketKind::Data;
  bool attack = false;
  bool starved = false;
  std::uint32_t head_wait = 0;
  std::uint64_t ready = 0;  // first cycle the flit may leave its buffer

  bool is_head() const noexcept { return index == 0; }
  bool is_tail() const noexcept { return index + 1 == count; }
};

class FlitRing {
 public:
  void reset(std::size_t capacity) {
    slots_.assign(capacity, Flit{});
    head_ = size_ = 0;
  }
  bool empty() const noexcept { return size_ == 0; }
  std::size_t size() const noexcept { return size_; }
  Flit& front() noexcept { return slots_[head_]; }
  const Flit& front() const noexcept { return slots_[head_]; }
  void push(const Flit& f) {
    slots_[(head_ + size_) % slots_.size()] = f;
    ++size_;
  }
  Flit pop() noexcept {
    Flit f = slots_[head_];
    head_ = (head_ + 1) % slots_.size();
    --size_;
    return f;
  }

 private:
  std::vector<Flit> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

template <class T>
using PortClass = std::array<std::array<T, kClasses>, kMaxPorts>;

struct Router {
  PortClass<FlitRing> in;
  PortClass<int> in_route{};
  PortClass<int> out_owner{};  // input port holding each (output, class)
  PortClass<std::uint32_t> credits{};
  PortClass<std::uint32_t> rr{};
  std::array<std::uint32_t, kMaxPorts> class_rr{};
  std::array<std::optional<Flit>, kMaxPorts> link;  // one flit per physical link per cycle
  PortClass<std::uint32_t> credit_return{};
  std::array<bool, kMaxPorts> busy{};  // crossbar input already used this cycle
  PortClass<bool> sent{};
};

struct ServiceEntry {
  NodeId requester = 0;
  std::uint64_t ready = 0;
  bool attack = false;
};

struct Interface {
  std::array<std::deque<Flit>, kClasses> queue;
  std::deque<ServiceEntry> service;
  std::uint32_t pending_responses = 0;
  std::array<std::uint32_t, kClasses> local_credits{};
  std::uint32_t inject_rr = 0;
  double rate = 0.0;
  DestinationPolicy policy = DestinationPolicy::UniformRandom;
  NodeId nearest_mc = 0;
  bool is_mc = false;
  bool is_mip = false;
};

struct VerticalRequest {
  NodeId router;
  int out;
  int in;
  std::size_t cls;
};

constexpr Port opposite(Port p) noexcept {
  switch (p) {
    case Port::East: return Port::West;
    case Port::West: return Port::East;
    case Port::North: return Port::South;
    case Port::South: return Port::North;
    case Port::Up: return Port::Down;
    case Port::Down: return Port::Up;
    case Port::Local: return Port::Local;
  }
  return Port::Local;
}

constexpr bool is_vertical(int port) noexcept {
  return port == static_cast<int>(Port::Up) || port == static_cast<int>(Port::Down);
}

}  // namespace

const std::vector<std::string>& benign_profile_names() {
  static const std::vector<std::string> names = {"uniform-low", "uniform-high", "nearest-mc", "random-mc",
                                                 "hotspot",     "bursty",       "mixed"};
  return names;
}

BenignProfile benign_profile(const std::string& name) {
  BenignProfile p;
  p.name = name;
  const auto phases = [&p](double on_to_off, double off_to_on, double off_scale) {
    p.on_to_off = on_to_off;
    p.off_to_on = off_to_on;
    p.off_scale = off_scale;
  };
  if (name == "uniform-low") {
    p.per_node_rate = 0.004;
    p.policy = DestinationPolicy::UniformRandom;
  } else if (name == "uniform-high") {
    p.per_node_rate = 0.010;
    p.policy = DestinationPolicy::UniformRandom;
  } else if (name == "nearest-mc") {
    p.per_node_rate = 0.016;
    p.policy = DestinationPolicy::NearestMc;
    phases(1.0 / 300.0, 1.0 / 600.0, 0.25);
  } else if (name == "random-mc") {
    p.per_node_rate = 0.012;
    p.policy = DestinationPolicy::RandomMc;
    phases(1.0 / 300.0, 1.0 / 600.0, 0.5);
  } else if (name == "hotspot") {
    p.per_node_rate = 0.006;
    p.policy = DestinationPolicy::Hotspot;
    p.hotspot_share = 0.5;
  } else if (name == "bursty") {
    p.per_node_rate = 0.020;
    p.policy = DestinationPolicy::RandomMc;
    phases(1.0 / 200.0, 1.0 / 800.0, 0.1);
  } else if (name == "mixed") {
    p.per_node_rate = 0.016;
    p.policy = DestinationPolicy::Mixed;
    phases(1.0 / 300.0, 1.0 / 600.0, 0.25);
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown benign profile '" + name + "'");
  }
  return p;
}

void validate(const SimConfig& cfg) {
  const auto& t = cfg.topology;
  if (t.node_count() == 0) throw Error(ErrorCode::InvalidConfig, "topology is empty");
  if (cfg.duration == 0) throw Error(ErrorCode::InvalidConfig, "duration must be > 0");
  if (cfg.buffer_depth == 0) throw Error(ErrorCode::InvalidConfig, "buffer_depth must be >= 1");
  if (cfg.request_flits == 0 || cfg.response_flits == 0 || cfg.request_flits > 0xFFFF ||
      cfg.response_flits > 0xFFFF)
    throw Error(ErrorCode::InvalidConfig, "packet sizes must be in [1, 65535]");
  if (cfg.service_queue_depth == 0 || cfg.response_backlog_limit == 0)
    throw Error(ErrorCode::InvalidConfig, "service queue and backlog limits must be >= 1");
  const auto& b = cfg.benign;
  auto probability = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!probability(b.per_node_rate) || !probability(b.on_to_off) || !probability(b.off_to_on) ||
      !probability(b.hotspot_share) || !probability(b.off_scale) || b.rate_spread < 0.0 ||
      b.rate_spread > 1.0)
    throw Error(ErrorCode::InvalidRate, "benign profile rates must lie in [0,1]");
  if (b.hotspot && !t.contains(*b.hotspot)) throw Error(ErrorCode::InvalidNode, "hotspot node out of range");
  if (!cfg.attack) return;
  const auto& a = *cfg.attack;
  if (!probability(a.pir)) throw Error(ErrorCode::InvalidRate, "pir must lie in [0,1]");
  if (a.vips.empty()) throw Error(ErrorCode::InvalidScenario, "attack needs at least one VIP");
  std::set<NodeId> mips;
  for (NodeId m : a.mips) {
    if (!t.contains(m)) throw Error(ErrorCode::InvalidNode, "MIP id out of range");
    if (t.is_mc(m)) throw Error(ErrorCode::InvalidScenario, "memory controller " + std::to_string(m) + " cannot be a MIP");
    if (!mips.insert(m).second) throw Error(ErrorCode::InvalidScenario, "duplicate MIP");
  }
  for (NodeId v : a.vips) {
    if (!t.contains(v)) throw Error(ErrorCode::InvalidNode, "VIP id out of range");
    if (!t.is_mc(v)) throw Error(ErrorCode::InvalidScenario, "VIP " + std::to_string(v) + " is not a memory controller");
    if (mips.count(v)) throw Error(ErrorCode::InvalidScenario, "MIPs and VIPs must be disjoint");
  }
}

std::vector<std::uint8_t> TraceSet::node_labels() const {
  std::vector<std::uint8_t> labels(nodes.size(), 0);
  if (attack)
    for (NodeId m : attack->mips)
      if (m < labels.size()) labels[m] = 1;
  return labels;
}

struct Simulator::State {
  SimConfig cfg;
  CounterRng rng;
  std::size_t ports = 5;
  std::vector<Router> routers;
  std::vector<Interface> nis;
  std::vector<std::uint32_t> column_rr;  // TSV arbitration pointer per (x,y) column
  std::vector<VerticalRequest> vertical;
  NodeId hotspot = 0;
  bool phase_on = true;
  std::uint64_t now = 0;
  std::uint32_t next_packet = 0;
  bool generation = true;

  std::uint64_t injected = 0;
  std::uint64_t ejected = 0;
  std::uint64_t starved = 0;
  std::vector<std::uint64_t> injected_per_node;
  std::vector<std::uint64_t> ejected_per_node;

  bool window_open = false;
  std::uint64_t window_start = 0;
  std::vector<std::uint64_t> last_in;
  std::vector<std::uint64_t> last_out;
  std::vector<NodeTrace> traces;
  EventLog events;

  explicit State(SimConfig c) : cfg(std::move(c)), rng(cfg.seed) {
    validate(cfg);
    const auto& t = cfg.topology;
    const std::size_t n = t.node_count();
    ports = t.port_count();
    routers.resize(n);
    nis.resize(n);
    injected_per_node.assign(n, 0);
    ejected_per_node.assign(n, 0);
    column_rr.assign(std::size_t{t.dim()} * t.dim(), 0);

    std::vector<NodeId> cores;
    for (NodeId id = 0; id < n; ++id)
      if (!t.is_mc(id)) cores.push_back(id);
    hotspot = cfg.benign.hotspot
                  ? *cfg.benign.hotspot
                  : (cores.empty() ? 0 : cores[rng.bits(kMapping, n, 0) % cores.size()]);

    for (NodeId id = 0; id < n; ++id) {
      auto& r = routers[id];
      for (std::size_t p = 0; p < ports; ++p) {
        const bool has_neighbor = p != 0 && t.neighbor_via(id, static_cast<Port>(p)) < n;
        for (std::size_t c = 0; c < kClasses; ++c) {
          r.in[p][c].reset(cfg.buffer_depth);
          r.in_route[p][c] = kNone;
          r.out_owner[p][c] = kNone;
          r.credits[p][c] = has_neighbor ? cfg.buffer_depth : 0;
        }
      }
      auto& ni = nis[id];
      ni.local_credits.fill(cfg.buffer_depth);
      ni.is_mc = t.is_mc(id);
      const auto& b = cfg.benign;
      const double mult = 1.0 - b.rate_spread + 2.0 * b.rate_spread * rng.uniform(kMapping, id, 1);
      ni.rate = std::min(1.0, b.per_node_rate * mult);
      ni.policy = b.policy;
      if (b.policy == DestinationPolicy::Mixed) {
        static constexpr DestinationPolicy choices[] = {DestinationPolicy::NearestMc, DestinationPolicy::RandomMc,
                                                        DestinationPolicy::UniformRandom};
        ni.policy = choices[rng.bits(kMapping, id, 2) % 3];
      }
      NodeId best = t.mc_nodes().front();
      for (NodeId mc : t.mc_nodes())
        if (t.manhattan(id, mc) < t.manhattan(id, best)) best = mc;
      ni.nearest_mc = best;
    }
    const double switch_sum = cfg.benign.on_to_off + cfg.benign.off_to_on;
    phase_on = switch_sum == 0.0 || rng.uniform(kMapping, n, 3) < cfg.benign.off_to_on / switch_sum;
    if (cfg.attack)
      for (NodeId m : cfg.attack->mips) nis[m].is_mip = true;
    if (cfg.record_events) {
      events.inbound.assign(n, {});
      events.outbound.assign(n, {});
    }
  }

  void enqueue_packet(NodeId src, NodeId dst, std::uint32_t flits, PacketKind kind, bool attack) {
    const std::uint32_t id = next_packet++;
    auto& q = nis[src].queue[class_of(kind)];
    for (std::uint32_t i = 0; i < flits; ++i) {
      Flit f;
      f.packet = id;
      f.src = src;
      f.dst = dst;
      f.index = static_cast<std::uint16_t>(i);
      f.count = static_cast<std::uint16_t>(flits);
      f.kind = kind;
      f.attack = attack;
      q.push_back(f);
    }
    if (kind == PacketKind::Response) ++nis[src].pending_responses;
  }

  NodeId pick_destination(NodeId src, const Interface& ni) const {
    const auto& t = cfg.topology;
    const auto& mcs = t.mc_nodes();
    const std::uint64_t r = rng.bits(kDestination, src, now);
    const auto random_mc = [&] { return mcs[(r >> 8) % mcs.size()]; };
    switch (ni.policy) {
      case DestinationPolicy::NearestMc:
        return ni.nearest_mc;
      case DestinationPolicy::RandomMc:
        return random_mc();
      case DestinationPolicy::UniformRandom: {
        const auto n = t.node_count();
        if (n < 2) return random_mc();
        auto d = static_cast<NodeId>((r >> 8) % (n - 1));
        return d >= src ? d + 1 : d;
      }
      case DestinationPolicy::Hotspot:
        if (to_unit(mix64(r)) < cfg.benign.hotspot_share && hotspot != src) return hotspot;
        return random_mc();
      case DestinationPolicy::Mixed:
        break;
    }
    return random_mc();
  }

  void generate() {
    const std::size_t n = nis.size();
    const auto& b = cfg.benign;
    if (b.on_to_off + b.off_to_on > 0.0) {
      const double u = rng.uniform(kBurst, n, now);
      if (phase_on ? u < b.on_to_off : u < b.off_to_on) phase_on = !phase_on;
    }
    const double scale = phase_on ? 1.0 : b.off_scale;
    for (NodeId id = 0; id < n; ++id) {
      auto& ni = nis[id];
      if (!ni.is_mc) {
        if (rng.uniform(kBenign, id, now) < ni.rate * scale)
          enqueue_packet(id, pick_destination(id, ni), cfg.request_flits, PacketKind::Request, false);
      }
      if (ni.is_mip && now >= cfg.attack->start_cycle && rng.uniform(kAttack, id, now) < cfg.attack->pir) {
        const auto& vips = cfg.attack->vips;
        const NodeId victim = vips[rng.bits(kVictim, id, now) % vips.size()];
        enqueue_packet(id, victim, cfg.request_flits, PacketKind::Request, true);
      }
    }
  }

  void serve() {
    for (NodeId id = 0; id < nis.size(); ++id) {
      auto& ni = nis[id];
      if (ni.service.empty() || ni.service.front().ready > now) continue;
      if (ni.pending_responses >= cfg.response_backlog_limit) continue;
      const ServiceEntry e = ni.service.front();
      ni.service.pop_front();
      enqueue_packet(id, e.requester, cfg.response_flits, PacketKind::Response, e.attack);
    }
  }

  void record(bool inbound, NodeId node) {
    if (!window_open) return;
    auto& last = inbound ? last_in[node] : last_out[node];
    const std::uint64_t delta = now - last;
    last = now;
    auto& arr = inbound ? traces[node].iifd : traces[node].oifd;
    arr.push_back(static_cast<std::uint8_t>(std::min<std::uint64_t>(delta, kDelaySaturation)));
    if (cfg.record_events) (inbound ? events.inbound : events.outbound)[node].push_back(now);
  }

  // One flit per cycle crosses the NI-router channel, round robin over classes.
  void inject_from_interfaces() {
    for (NodeId id = 0; id < nis.size(); ++id) {
      auto& ni = nis[id];
      std::size_t c = kClasses;
      for (std::size_t k = 0; k < kClasses; ++k) {
        const std::size_t cand = (ni.inject_rr + k) % kClasses;
        if (!ni.queue[cand].empty() && ni.local_credits[cand] > 0) {
          c = cand;
          break;
        }
      }
      if (c == kClasses) continue;
      ni.inject_rr = static_cast<std::uint32_t>((c + 1) % kClasses);
      Flit f = ni.queue[c].front();
      ni.queue[c].pop_front();
      --ni.local_credits[c];
      f.ready = now + 1;
      f.head_wait = 0;
      if (f.kind == PacketKind::Response && f.is_tail()) --ni.pending_responses;
      routers[id].in[0][c].push(f);
      ++injected;
      ++injected_per_node[id];
      record(false, id);
    }
  }

  bool can_eject(NodeId id, const Flit& f) const {
    if (f.kind != PacketKind::Request) return true;
    return nis[id].service.size() < cfg.service_queue_depth;
  }

  void eject(NodeId id, const Flit& f) {
    ++ejected;
    ++ejected_per_node[id];
    record(true, id);
    if (f.kind == PacketKind::Request && f.is_tail())
      nis[id].service.push_back({f.src, now + cfg.service_latency, f.attack});
  }

  void commit(NodeId id, int in, int out, std::size_t c) {
    auto& r = routers[id];
    Flit f = r.in[in][c].pop();
    r.busy[in] = true;
    r.sent[in][c] = true;
    ++r.credit_return[in][c];
    if (f.is_tail()) {
      r.out_owner[out][c] = kNone;
      r.in_route[in][c] = kNone;
    }
    r.class_rr[out] = static_cast<std::uint32_t>((c + 1) % kClasses);
    if (out == 0) {
      eject(id, f);
    } else {
      --r.credits[out][c];
      r.link[out] = f;
    }
  }

  void deliver_links() {
    const auto& t = cfg.topology;
    for (NodeId id = 0; id < routers.size(); ++id) {
      auto& r = routers[id];
      for (std::size_t p = 1; p < ports; ++p) {
        if (!r.link[p]) continue;
        Flit f = *r.link[p];
        r.link[p].reset();
        const NodeId next = t.neighbor_via(id, static_cast<Port>(p));
        f.ready = now + 1;
        f.head_wait = 0;
        routers[next].in[static_cast<std::size_t>(opposite(static_cast<Port>(p)))][class_of(f.kind)].push(f);
      }
    }
  }

  void allocate() {
    const auto& t = cfg.topology;
    vertical.clear();
    for (NodeId id = 0; id < routers.size(); ++id) {
      auto& r = routers[id];
      r.busy.fill(false);
      for (auto& s : r.sent) s.fill(false);
      for (std::size_t p = 0; p < ports; ++p)
        for (std::size_t c = 0; c < kClasses; ++c)
          if (!r.in[p][c].empty() && r.in_route[p][c] == kNone && r.in[p][c].front().is_head())
            r.in_route[p][c] = static_cast<int>(t.next_port(id, r.in[p][c].front().dst));

      for (std::size_t o = 0; o < ports; ++o) {
        // Wormhole lock per (output, class).
        for (std::size_t c = 0; c < kClasses; ++c) {
          if (r.out_owner[o][c] != kNone) continue;
          for (std::size_t k = 0; k < ports; ++k) {
            const std::size_t i = (r.rr[o][c] + k) % ports;
            if (r.in[i][c].empty() || r.in_route[i][c] != static_cast<int>(o)) continue;
            const Flit& f = r.in[i][c].front();
            if (!f.is_head() || f.ready > now) continue;
            r.out_owner[o][c] = static_cast<int>(i);
            r.rr[o][c] = static_cast<std::uint32_t>((i + 1) % ports);
            break;
          }
        }
        // The physical output carries one flit: pick a class round robin.
        for (std::size_t k = 0; k < kClasses; ++k) {
          const std::size_t c = (r.class_rr[o] + k) % kClasses;
          const int i = r.out_owner[o][c];
          if (i == kNone || r.busy[i] || r.in[i][c].empty()) continue;
          const Flit& f = r.in[i][c].front();
          if (f.ready > now) continue;
          if (o == 0) {
            if (!can_eject(id, f)) continue;
            commit(id, i, 0, c);
          } else {
            if (r.credits[o][c] == 0) continue;
            if (is_vertical(static_cast<int>(o))) {
              r.busy[i] = true;  // reserved while the column is arbitrated
              vertical.push_back({id, static_cast<int>(o), i, c});
            } else {
              commit(id, i, static_cast<int>(o), c);
            }
          }
          break;
        }
      }
    }
    arbitrate_tsv();
  }

  // One vertical transfer per (x,y) column per cycle, round robin over layers.
  void arbitrate_tsv() {
    if (vertical.empty()) return;
    const auto& t = cfg.topology;
    const std::uint32_t n = t.dim();
    std::vector<int> winner(column_rr.size(), kNone);
    std::vector<std::uint32_t> best_rank(column_rr.size(), ~0u);
    for (std::size_t k = 0; k < vertical.size(); ++k) {
      const Coord c = t.coord(vertical[k].router);
      const std::size_t col = c.x + c.y * n;
      const std::uint32_t rank = (c.z + n - column_rr[col]) % n;
      if (rank < best_rank[col]) {
        best_rank[col] = rank;
        winner[col] = static_cast<int>(k);
      }
    }
    for (std::size_t col = 0; col < winner.size(); ++col) {
      if (winner[col] == kNone) continue;
      const auto& v = vertical[static_cast<std::size_t>(winner[col])];
      commit(v.router, v.in, v.out, v.cls);
      column_rr[col] = (t.coord(v.router).z + 1) % n;
    }
  }

  void account_waits() {
    for (auto& r : routers)
      for (std::size_t p = 0; p < ports; ++p)
        for (std::size_t c = 0; c < kClasses; ++c) {
          if (r.sent[p][c] || r.in[p][c].empty()) continue;
          Flit& f = r.in[p][c].front();
          if (f.ready > now) continue;
          ++f.head_wait;
          if (f.head_wait > cfg.starvation_threshold && !f.starved) {
            f.starved = true;
            ++starved;
          }
        }
  }

  void return_credits() {
    const auto& t = cfg.topology;
    for (NodeId id = 0; id < routers.size(); ++id) {
      auto& r = routers[id];
      for (std::size_t p = 0; p < ports; ++p)
        for (std::size_t c = 0; c < kClasses; ++c) {
          const std::uint32_t n = r.credit_return[p][c];
          if (n == 0) continue;
          r.credit_return[p][c] = 0;
          if (p == 0) {
            nis[id].local_credits[c] += n;
          } else {
            const NodeId up = t.neighbor_via(id, static_cast<Port>(p));
            routers[up].credits[static_cast<std::size_t>(opposite(static_cast<Port>(p)))][c] += n;
          }
        }
    }
  }

  void step() {
    deliver_links();
    if (generation) generate();
    serve();
    inject_from_interfaces();
    allocate();
    account_waits();
    return_credits();
    ++now;
  }

  std::uint64_t count_in_flight() const {
    std::uint64_t total = 0;
    for (const auto& r : routers)
      for (std::size_t p = 0; p < ports; ++p)
        total += r.in[p][0].size() + r.in[p][1].size() + (r.link[p] ? 1 : 0);
    return total;
  }
};

Simulator::Simulator(SimConfig cfg) : s_(std::make_unique<State>(std::move(cfg))) {}
Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

void Simulator::step() { s_->step(); }
void Simulator::run(std::uint64_t cycles) {
  for (std::uint64_t i = 0; i < cycles; ++i) s_->step();
}
std::uint64_t Simulator::cycle() const noexcept { return s_->now; }

void Simulator::inject_packet(NodeId src, NodeId dst, std::uint32_t flits, PacketKind kind) {
  const auto& t = s_->cfg.topology;
  if (!t.contains(src) || !t.contains(dst)) throw Error(ErrorCode::InvalidNode, "packet endpoint out of range");
  if (flits == 0 || flits > 0xFFFF) throw Error(ErrorCode::InvalidConfig, "packet size must be in [1, 65535]");
  s_->enqueue_packet(src, dst, flits, kind, false);
}

void Simulator::set_generation(bool enabled) noexcept { s_->generation = enabled; }

void Simulator::begin_window() {
  const std::size_t n = s_->routers.size();
  s_->window_open = true;
  s_->window_start = s_->now;
  s_->last_in.assign(n, s_->now);
  s_->last_out.assign(n, s_->now);
  s_->traces.assign(n, {});
}

TraceSet Simulator::end_window() {
  auto& s = *s_;
  TraceSet t;
  t.kind = s.cfg.topology.kind();
  t.dim = s.cfg.topology.dim();
  t.topology_digest = s.cfg.topology.digest();
  t.window_start = s.window_start;
  t.duration = s.now - s.window_start;
  t.attack = s.cfg.attack;
  t.nodes = std::move(s.traces);
  if (t.nodes.empty()) t.nodes.assign(s.routers.size(), {});
  t.stats.starved_flits = s.starved;
  t.stats.injected_flits = s.injected;
  t.stats.ejected_flits = s.ejected;
  t.stats.in_flight_flits = s.count_in_flight();
  t.stats.injected_per_node = s.injected_per_node;
  t.stats.ejected_per_node = s.ejected_per_node;
  s.window_open = false;
  s.traces.clear();
  return t;
}

std::uint64_t Simulator::injected() const noexcept { return s_->injected; }
std::uint64_t Simulator::ejected() const noexcept { return s_->ejected; }
std::uint64_t Simulator::starved() const noexcept { return s_->starved; }
std::uint64_t Simulator::count_in_flight() const { return s_->count_in_flight(); }
std::uint64_t Simulator::count_queued() const {
  std::uint64_t total = 0;
  for (const auto& ni : s_->nis) total += ni.queue[0].size() + ni.queue[1].size();
  return total;
}
const EventLog& Simulator::events() const noexcept { return s_->events; }
const SimConfig& Simulator::config() const noexcept { return s_->cfg; }

TraceSet run_scenario(const SimConfig& cfg) {
  Simulator sim(cfg);
  sim.run(cfg.warmup);
  sim.begin_window();
  sim.run(cfg.duration);
  if (cfg.drain_cycles > 0) {
    sim.set_generation(false);
    sim.run(cfg.drain_cycles);
  }
  return sim.end_window();
}

std::vector<TraceSet> run_windows(const SimConfig& cfg, std::size_t count) {
  Simulator sim(cfg);
  sim.run(cfg.warmup);
  std::vector<TraceSet> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    sim.begin_window();
    sim.run(cfg.duration);
    out.push_back(sim.end_window());
  }
  return out;
}

double starvation_increase(const StarvationStats& baseline, const StarvationStats& loaded) {
  if (baseline.starved_flits == 0)
    throw Error(ErrorCode::UndefinedBaseline, "baseline has no starved flits");
  return (static_cast<double>(loaded.starved_flits) - static_cast<double>(baseline.starved_flits)) /
         static_cast<double>(baseline.starved_flits);
}

ConservationReport flit_conservation_report(const TraceSet& trace) {
  ConservationReport r;
  r.injected = trace.stats.injected_flits;
  r.ejected = trace.stats.ejected_flits;
  r.in_flight = trace.stats.in_flight_flits;
  r.injected_per_node = trace.stats.injected_per_node;
  r.ejected_per_node = trace.stats.ejected_per_node;
  std::uint64_t inj = 0, ej = 0;
  for (auto v : r.injected_per_node) inj += v;
  for (auto v : r.ejected_per_node) ej += v;
  r.holds = r.injected == r.ejected + r.in_flight && inj == r.injected && ej == r.ejected;
  return r;
}

}  // namespace nocguard
