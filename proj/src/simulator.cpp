#include "edca/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>

#include "edca/capacity.hpp"
#include "edca/error.hpp"
#include "edca/timing.hpp"

namespace edca {

SimOptions SimOptions::from(const SimulationConfig& cfg) {
  SimOptions o;
  o.duration_s = cfg.duration_s;
  o.warmup_s = cfg.warmup_s;
  o.buffer_packets = cfg.buffer_packets;
  o.deadline_ms = cfg.deadline_ms;
  o.wired_delay_ms = cfg.wired_delay_ms;
  return o;
}

double TcMetrics::loss_ratio() const {
  const auto resolved = window_delivered + window_lost;
  return resolved == 0 ? 0.0 : static_cast<double>(window_lost) / static_cast<double>(resolved);
}

double TcMetrics::collision_probability() const {
  return attempts == 0 ? 0.0 : static_cast<double>(collisions) / static_cast<double>(attempts);
}

double SimMetrics::total_throughput() const {
  double s = 0.0;
  for (const auto& c : classes) s += c.throughput;
  return s;
}

double SimMetrics::max_loss_ratio() const {
  double worst = 0.0;
  for (const auto& c : classes)
    if (!c.saturated) worst = std::max(worst, c.loss_ratio());
  return worst;
}

namespace {

using Nanos = std::int64_t;
constexpr Nanos kNever = std::numeric_limits<Nanos>::max();

Nanos to_ns(double us) { return std::llround(us * 1000.0); }

struct Packet {
  Nanos enqueued = 0;
  Nanos head = 0;  // reached the head of the queue
  Nanos first_attempt = -1;
  int bytes = 0;
  bool in_window = false;
};

struct Queue {
  int station = 0;
  int ac = 0;
  int tc = 0;
  bool saturated = false;
  int saturated_bytes = 0;
  Nanos aifs = 0;
  int offset = 0;  // AIFSN - min AIFSN
  const AcParams* params = nullptr;
  std::deque<Packet> buffer;
  int counter = 0;     // backoff slots left, counted from the end of AIFS
  int slots = 0;       // slots after AIFS at which the head packet goes out
  bool immediate = false;  // `slots` came from an arrival to an idle queue
  int retries = 0;
};

struct Source {
  int queue = 0;
  Nanos next = 0;
  Nanos interval = 0;
  int bytes = 0;
  const std::vector<std::pair<Nanos, int>>* frames = nullptr;
  std::size_t position = 0;
};

struct Arrival {
  Nanos time;
  int source;
  bool operator>(const Arrival& o) const { return time != o.time ? time > o.time : source > o.source; }
};

struct Accumulators {
  double service_sum_ns = 0.0;
  std::uint64_t service_count = 0;
  double delay_sum_ns = 0.0;
  std::uint64_t delay_count = 0;
  double airtime_ns = 0.0;
  std::vector<double> activity;
};

std::vector<std::pair<Nanos, int>> read_trace(const std::string& path, int header_bytes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path);
  std::vector<std::pair<Nanos, int>> frames;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    double interval_ms = 0.0, payload = 0.0;
    if (line.empty() || line[0] == '#') continue;
    if (!(ls >> interval_ms >> payload)) continue;
    frames.emplace_back(to_ns(interval_ms * 1000.0), static_cast<int>(std::lround(payload)) + header_bytes);
  }
  if (frames.empty()) throw IoError("trace " + path + " has no frames");
  return frames;
}

class Simulation {
public:
  Simulation(const Scenario& sc, std::uint64_t seed, const SimOptions& opt)
      : sc_(sc), opt_(opt), rng_(seed), table_(derive_traffic_classes(sc.stations, sc.acs)) {
    if (!(opt.duration_s > opt.warmup_s)) throw ConfigError("simulation.duration_s", "must exceed the warmup");
    slot_ = to_ns(sc.phy.slot_us);
    end_ = to_ns(opt.duration_s * 1e6);
    warmup_ = to_ns(opt.warmup_s * 1e6);
    wired_ = to_ns(opt.wired_delay_ms * 1e3);
    deadline_ = to_ns(opt.deadline_ms * 1e3);
    min_aifsn_ = table_.min_aifsn;
    min_aifs_ = to_ns(aifs_us(min_aifsn_, sc.phy));
    if (!opt.packet_trace_path.empty()) {
      trace_.open(opt.packet_trace_path);
      if (!trace_) throw IoError("cannot write packet trace " + opt.packet_trace_path);
      trace_ << "tc,station,ac,enqueue_us,first_attempt_us,done_us,outcome,retries\n";
    }
    build();
  }

  SimMetrics run();

private:
  void build();
  void draw_backoff(Queue& q, int stage) {
    std::uniform_int_distribution<int> d(0, q.params->window(stage));
    q.counter = d(rng_);
  }
  Nanos tx_time(const Queue& q) const { return idle_start_ + q.aifs + slot_ * q.slots; }
  void arrive(int source_index, Nanos t);
  void enqueue(Queue& q, int qi, Packet p, Nanos t);
  void became_head(int qi, Nanos t);
  void complete(int qi, Nanos t, bool success);
  void finish(const Queue& q, const Packet& p, Nanos done, const char* outcome);
  void transmit(Nanos t);
  int airtime_key(int bytes);

  const Scenario& sc_;
  SimOptions opt_;
  std::mt19937_64 rng_;
  TrafficClassTable table_;
  Nanos slot_ = 0, end_ = 0, warmup_ = 0, wired_ = 0, deadline_ = 0, min_aifs_ = 0;
  int min_aifsn_ = 0;
  Nanos idle_start_ = 0;

  std::vector<Queue> queues_;
  std::vector<Source> sources_;
  std::map<std::string, std::vector<std::pair<Nanos, int>>> traces_;
  std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> arrivals_;
  std::map<int, std::pair<Nanos, Nanos>> airtime_;  // bytes -> (success busy, frame airtime)
  int active_ = 0;
  std::vector<int> pending_samples_;

  SimMetrics m_;
  std::vector<Accumulators> acc_;
  std::vector<std::uint64_t> idle_lengths_;
  std::ofstream trace_;
};

void Simulation::build() {
  const int J = static_cast<int>(table_.size());
  m_.classes.resize(J);
  acc_.resize(J);
  for (int j = 0; j < J; ++j) {
    auto& c = m_.classes[j];
    c.ac = table_[j].ac;
    c.flows = table_[j].flows;
    c.saturated = table_[j].traffic.saturated();
    c.delay_histogram.assign(kDelayBins, 0);
  }

  int station_id = 0;
  for (const auto& spec : sc_.stations) {
    for (int copy = 0; copy < spec.count; ++copy, ++station_id) {
      for (int ac = kNumAcs - 1; ac >= 0; --ac) {
        if (!spec.activity[ac] || !spec.traffic[ac]) continue;
        const auto& t = *spec.traffic[ac];
        Queue q;
        q.station = station_id;
        q.ac = ac;
        q.tc = class_index_of(table_, spec, ac);
        if (q.tc < 0) throw std::logic_error("station queue has no traffic class");
        q.params = &*sc_.acs[ac];
        q.aifs = to_ns(aifs_us(*q.params, sc_.phy));
        q.offset = q.params->aifsn - min_aifsn_;
        q.saturated = t.saturated();
        const int qi = static_cast<int>(queues_.size());
        if (q.saturated) {
          q.saturated_bytes = static_cast<int>(std::lround(t.packet_bytes));
          draw_backoff(q, 1);
          q.slots = q.counter;
          queues_.push_back(std::move(q));
          ++active_;
          continue;
        }
        queues_.push_back(std::move(q));
        for (int f = 0; f < t.flows; ++f) {
          Source s;
          s.queue = qi;
          if (t.kind == TrafficKind::trace) {
            auto it = traces_.find(t.trace_path);
            if (it == traces_.end()) it = traces_.emplace(t.trace_path, read_trace(t.trace_path, t.header_bytes)).first;
            s.frames = &it->second;
            std::uniform_int_distribution<std::size_t> pos(0, s.frames->size() - 1);
            s.position = pos(rng_);
            s.interval = (*s.frames)[s.position].first;
          } else {
            s.interval = to_ns(t.interval_ms * 1e3);
            s.bytes = static_cast<int>(std::lround(t.packet_bytes));
          }
          std::uniform_int_distribution<Nanos> phase(0, std::max<Nanos>(s.interval - 1, 0));
          s.next = phase(rng_);
          arrivals_.push({s.next, static_cast<int>(sources_.size())});
          sources_.push_back(s);
        }
      }
    }
  }
  // Saturated queues start with a head-of-line packet.
  for (int qi = 0; qi < static_cast<int>(queues_.size()); ++qi) {
    auto& q = queues_[qi];
    if (!q.saturated) continue;
    Packet p;
    p.bytes = q.saturated_bytes;
    p.in_window = false;
    ++m_.classes[q.tc].generated;
    q.buffer.push_back(p);
  }
}

int Simulation::airtime_key(int bytes) {
  if (!airtime_.count(bytes)) {
    const double frame = frame_duration_us(sc_.phy.mac_header_bytes + bytes, sc_.phy.data_rate_mbps, sc_.phy);
    airtime_[bytes] = {to_ns(success_busy_us(frame, sc_.phy, sc_.access)), to_ns(frame)};
  }
  return bytes;
}

void Simulation::finish(const Queue& q, const Packet& p, Nanos done, const char* outcome) {
  if (!trace_.is_open()) return;
  trace_ << q.tc << ',' << q.station << ',' << q.ac << ',' << p.enqueued / 1000.0 << ','
         << (p.first_attempt < 0 ? -1.0 : p.first_attempt / 1000.0) << ',' << done / 1000.0 << ',' << outcome << ','
         << q.retries << '\n';
}

void Simulation::became_head(int qi, Nanos t) {
  if (!opt_.collect_activity || t < warmup_) return;
  pending_samples_.push_back(queues_[qi].tc);
}

void Simulation::enqueue(Queue& q, int qi, Packet p, Nanos t) {
  auto& c = m_.classes[q.tc];
  ++c.generated;
  p.enqueued = t;
  p.in_window = t >= warmup_;
  if (p.in_window) ++c.window_generated;
  if (static_cast<int>(q.buffer.size()) >= opt_.buffer_packets) {
    ++c.buffer_drops;
    if (p.in_window) ++c.window_lost;
    finish(q, p, t, "buffer_drop");
    return;
  }
  q.buffer.push_back(p);
  if (q.buffer.size() > 1) return;

  q.buffer.front().head = t;
  ++active_;
  became_head(qi, t);
  if (t < idle_start_) {
    // Medium busy: a zero counter has to be redrawn before access.
    if (q.counter == 0) draw_backoff(q, 1);
    q.slots = q.counter;
    q.immediate = false;
    return;
  }
  const Nanos since = t - idle_start_ - q.aifs;
  const int ready = since <= 0 ? 0 : static_cast<int>((since + slot_ - 1) / slot_);
  q.slots = std::max(q.counter, ready);
  q.immediate = ready > q.counter;
}

void Simulation::arrive(int si, Nanos t) {
  auto& s = sources_[si];
  auto& q = queues_[s.queue];
  Packet p;
  if (s.frames) {
    p.bytes = (*s.frames)[s.position].second;
    s.position = (s.position + 1) % s.frames->size();
    s.interval = (*s.frames)[s.position].first;
  } else {
    p.bytes = s.bytes;
  }
  enqueue(q, s.queue, p, t);
  s.next = t + s.interval;
  arrivals_.push({s.next, si});
}

void Simulation::complete(int qi, Nanos done, bool success) {
  auto& q = queues_[qi];
  auto& c = m_.classes[q.tc];
  auto& a = acc_[q.tc];
  Packet p = q.buffer.front();
  q.buffer.pop_front();
  if (done >= warmup_) {
    a.service_sum_ns += static_cast<double>(done - p.head);
    ++a.service_count;
  }
  if (success) {
    const Nanos wireless = done - p.enqueued;
    const bool late = !q.saturated && wireless + wired_ > deadline_;
    if (late) {
      ++c.deadline_drops;
      if (p.in_window) ++c.window_lost;
      finish(q, p, done, "late");
    } else {
      ++c.delivered;
      if (p.in_window) {
        ++c.window_delivered;
        const auto bin = std::min<std::int64_t>(wireless / 1000000, kDelayBins - 1);
        ++c.delay_histogram[bin];
        a.delay_sum_ns += static_cast<double>(wireless);
        ++a.delay_count;
      }
      finish(q, p, done, "delivered");
    }
  } else {
    ++c.retry_drops;
    if (p.in_window) ++c.window_lost;
    finish(q, p, done, "retry_drop");
  }
  q.retries = 0;
  draw_backoff(q, 1);
  q.slots = q.counter;
  q.immediate = false;
  if (q.saturated) {
    Packet next;
    next.bytes = q.saturated_bytes;
    next.enqueued = done;
    next.in_window = done >= warmup_;
    ++c.generated;
    if (next.in_window) ++c.window_generated;
    q.buffer.push_back(next);
  }
  if (q.buffer.empty()) {
    --active_;
    return;
  }
  q.buffer.front().head = done;
  became_head(qi, done);
}

void Simulation::transmit(Nanos t) {
  // Contenders in this slot; per station the highest AC wins internally.
  std::vector<int> ready;
  for (int qi = 0; qi < static_cast<int>(queues_.size()); ++qi) {
    const auto& q = queues_[qi];
    if (!q.buffer.empty() && tx_time(q) == t) ready.push_back(qi);
  }
  std::vector<int> winners, losers;
  std::map<int, int> best;  // station -> queue
  for (int qi : ready) {
    const int st = queues_[qi].station;
    auto it = best.find(st);
    if (it == best.end()) {
      best[st] = qi;
    } else if (queues_[qi].ac > queues_[it->second].ac) {
      losers.push_back(it->second);
      it->second = qi;
    } else {
      losers.push_back(qi);
    }
  }
  for (auto& [st, qi] : best) winners.push_back(qi);

  const bool measured = t >= warmup_;
  const Nanos elapsed_min = (t - idle_start_ - min_aifs_) / slot_;  // idle slots after the smallest AIFS
  if (measured) {
    if (static_cast<std::size_t>(elapsed_min) >= idle_lengths_.size()) idle_lengths_.resize(elapsed_min + 1, 0);
    ++idle_lengths_[elapsed_min];
  }

  Nanos busy = 0;
  Nanos longest = 0;
  for (int qi : winners) {
    auto& q = queues_[qi];
    auto& p = q.buffer.front();
    if (p.first_attempt < 0) p.first_attempt = t;
    const auto& at = airtime_[airtime_key(p.bytes)];
    busy = at.first;
    longest = std::max(longest, at.second);
  }
  const bool success = winners.size() == 1;
  if (!success) busy = to_ns(collision_busy_us(longest / 1000.0, sc_.phy, sc_.access));
  const Nanos done = t + busy;

  // Everyone else counts down one step per slot boundary since its AIFS
  // expired, the boundary at t included.
  std::vector<bool> sent(queues_.size(), false);
  for (int qi : ready) sent[qi] = true;
  for (int qi = 0; qi < static_cast<int>(queues_.size()); ++qi) {
    if (sent[qi]) continue;
    auto& q = queues_[qi];
    const Nanos since = t - idle_start_ - q.aifs;
    const int idle_slots = since < 0 ? 0 : static_cast<int>(since / slot_) + 1;
    if (q.buffer.empty()) {
      q.counter = std::max(0, q.counter - idle_slots);
    } else if (q.immediate) {
      draw_backoff(q, q.retries + 1);
      q.immediate = false;
    } else {
      q.counter -= idle_slots;
    }
    if (!q.buffer.empty()) q.slots = q.counter;
  }

  auto collide = [&](int qi) {
    auto& q = queues_[qi];
    auto& c = m_.classes[q.tc];
    if (measured) {
      ++c.attempts;
      ++c.collisions;
    }
    ++q.retries;
    if (q.retries >= q.params->retry_limit) {
      complete(qi, done, false);
      return;
    }
    draw_backoff(q, q.retries + 1);
    q.slots = q.counter;
    q.immediate = false;
  };

  for (int qi : losers) {
    if (measured) {
      ++m_.classes[queues_[qi].tc].internal_collisions;
      ++m_.internal_collisions;
    }
    if (queues_[qi].buffer.front().first_attempt < 0) queues_[qi].buffer.front().first_attempt = t;
    collide(qi);
  }
  if (success) {
    const int qi = winners.front();
    auto& q = queues_[qi];
    if (measured) {
      auto& c = m_.classes[q.tc];
      ++c.attempts;
      ++m_.successes;
      acc_[q.tc].airtime_ns += static_cast<double>(airtime_[q.buffer.front().bytes].second);
    }
    complete(qi, done, true);
  } else {
    if (measured) ++m_.external_collisions;
    for (int qi : winners) collide(qi);
  }
  idle_start_ = done;
}

SimMetrics Simulation::run() {
  for (;;) {
    // Arrivals that fell into the last busy period.
    while (!arrivals_.empty() && arrivals_.top().time < idle_start_ && arrivals_.top().time < end_) {
      const auto a = arrivals_.top();
      arrivals_.pop();
      arrive(a.source, a.time);
    }
    for (int tc : pending_samples_) {
      auto& h = acc_[tc].activity;
      if (static_cast<int>(h.size()) <= active_) h.resize(active_ + 1, 0.0);
      h[active_] += 1.0;
    }
    pending_samples_.clear();

    Nanos next_tx = kNever;
    for (const auto& q : queues_)
      if (!q.buffer.empty()) next_tx = std::min(next_tx, tx_time(q));
    const Nanos next_arrival = arrivals_.empty() ? kNever : arrivals_.top().time;
    if (next_arrival <= next_tx) {
      if (next_arrival >= end_) break;
      const auto a = arrivals_.top();
      arrivals_.pop();
      arrive(a.source, a.time);
      continue;
    }
    if (next_tx >= end_) break;
    transmit(next_tx);
  }

  const double window_ns = static_cast<double>(end_ - warmup_);
  m_.measured_s = window_ns * 1e-9;
  for (const auto& q : queues_) m_.classes[q.tc].residual += q.buffer.size();
  for (std::size_t j = 0; j < m_.classes.size(); ++j) {
    auto& c = m_.classes[j];
    const auto& a = acc_[j];
    c.throughput = a.airtime_ns / window_ns;
    c.mean_service_us = a.service_count ? a.service_sum_ns / a.service_count / 1000.0 : 0.0;
    c.mean_delay_us = a.delay_count ? a.delay_sum_ns / a.delay_count / 1000.0 : 0.0;
    double total = 0.0;
    for (double v : a.activity) total += v;
    c.activity = a.activity;
    if (total > 0.0)
      for (auto& v : c.activity) v /= total;
  }
  m_.slot_visits.assign(idle_lengths_.size(), 0);
  std::uint64_t reach = 0;
  for (std::size_t n = idle_lengths_.size(); n-- > 0;) {
    reach += idle_lengths_[n];
    m_.slot_visits[n] = reach;
  }
  return m_;
}

}  // namespace

SimMetrics simulate(const Scenario& scenario, std::uint64_t seed, const SimOptions& options) {
  Simulation sim(scenario, seed, options);
  return sim.run();
}

}  // namespace edca

namespace edca {

int capacity_search(const std::function<Scenario(int)>& scenario_for, const CapacitySearch& search,
                    const SimOptions& options) {
  if (search.seeds.empty()) throw std::invalid_argument("capacity search needs at least one seed");
  auto passes = [&](int n) {
    const Scenario sc = scenario_for(n);
    std::vector<std::future<double>> runs;
    for (auto seed : search.seeds)
      runs.push_back(std::async(std::launch::async, [&sc, seed, &options] {
        return simulate(sc, seed, options).max_loss_ratio();
      }));
    std::size_t ok = 0;
    for (auto& r : runs)
      if (r.get() <= search.loss_threshold) ++ok;
    return 2 * ok > search.seeds.size();
  };
  const int n = largest_passing(passes, search.lo, search.cap);
  if (n < search.lo)
    throw std::domain_error("loss threshold is not met with " + std::to_string(search.lo) + " flow(s)");
  return n;
}

std::vector<double> activity_histogram(const Scenario& scenario, int tagged, const std::vector<std::uint64_t>& seeds,
                                       SimOptions options) {
  options.collect_activity = true;
  std::vector<std::future<std::vector<double>>> runs;
  for (auto seed : seeds)
    runs.push_back(std::async(std::launch::async, [&scenario, seed, &options, tagged] {
      const auto m = simulate(scenario, seed, options);
      if (tagged < 0 || tagged >= static_cast<int>(m.classes.size()))
        throw std::out_of_range("tagged TC index out of range");
      return m.classes[tagged].activity;
    }));
  std::vector<double> mean;
  for (auto& r : runs) {
    const auto h = r.get();
    if (h.size() > mean.size()) mean.resize(h.size(), 0.0);
    for (std::size_t k = 0; k < h.size(); ++k) mean[k] += h[k] / static_cast<double>(seeds.size());
  }
  return mean;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double d = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = k < a.size() ? a[k] : 0.0;
    const double y = k < b.size() ? b[k] : 0.0;
    d += std::abs(x - y);
  }
  return 0.5 * d;
}

}  // namespace edca
