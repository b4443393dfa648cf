#include "sdm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sdm/error.hpp"

namespace sdm::scenario {

namespace {

std::vector<std::string> splitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parseDouble(const std::string& s, int line_no, const char* field) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) +
                                      ": bad value for " + field + ": '" + s + "'");
  }
}

constexpr char kHeader[] = "scenario_id,vehicle_id,x_m,y_m,v_mps,theta_rad,is_av";

}  // namespace

void validateScenario(const Scenario& s, const RewardConfig& cfg,
                      const RoadConfig& road) {
  if (s.vehicleCount() < 2) {
    throw Error(ErrorCode::InvalidArg,
                "scenario '" + s.scenario_id + "': needs at least 2 vehicles");
  }
  for (std::size_t i = 0; i < s.initial_states.size(); ++i) {
    if (isOffRoad(s.initial_states[i], road)) {
      throw Error(ErrorCode::InvalidArg, "scenario '" + s.scenario_id + "': vehicle " +
                                             std::to_string(i) + " starts off-road");
    }
    if (s.initial_states[i].v < 0.0) {
      throw Error(ErrorCode::InvalidArg, "scenario '" + s.scenario_id + "': vehicle " +
                                             std::to_string(i) + " has negative speed");
    }
  }
  for (std::size_t i = 0; i < s.initial_states.size(); ++i) {
    for (std::size_t j = i + 1; j < s.initial_states.size(); ++j) {
      if (checkCollision(s.initial_states[i], s.initial_states[j], cfg)) {
        throw Error(ErrorCode::InvalidArg,
                    "scenario '" + s.scenario_id + "': initial footprints of vehicles " +
                        std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }
}

std::vector<Scenario> loadScenarios(const std::string& path, const RewardConfig& cfg,
                                    const RoadConfig& road) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scenario file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Parse, "empty scenario file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw Error(ErrorCode::Parse,
                std::string("bad header, expected '") + kHeader + "', got '" + line + "'");
  }

  struct Row {
    VehicleState state;
    bool is_av;
  };
  // Preserve first-appearance order of scenario ids.
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = splitCsv(line);
    if (f.size() != 7) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                        std::to_string(f.size()));
    }
    Row r;
    r.state.x = parseDouble(f[2], line_no, "x_m");
    r.state.y = parseDouble(f[3], line_no, "y_m");
    r.state.v = parseDouble(f[4], line_no, "v_mps");
    r.state.theta = parseDouble(f[5], line_no, "theta_rad");
    if (f[6] == "0") {
      r.is_av = false;
    } else if (f[6] == "1") {
      r.is_av = true;
    } else {
      throw Error(ErrorCode::Parse,
                  "line " + std::to_string(line_no) + ": is_av must be 0 or 1, got '" + f[6] + "'");
    }
    if (rows.find(f[0]) == rows.end()) order.push_back(f[0]);
    rows[f[0]].push_back(r);
  }

  std::vector<Scenario> out;
  for (const auto& id : order) {
    const auto& rs = rows[id];
    int av_count = 0;
    int av_pos = -1;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (rs[i].is_av) {
        ++av_count;
        av_pos = static_cast<int>(i);
      }
    }
    if (av_count != 1) {
      throw Error(ErrorCode::Parse, "scenario '" + id + "': expected exactly one is_av=1 row, got " +
                                        std::to_string(av_count));
    }
    Scenario s;
    s.scenario_id = id;
    s.initial_states.push_back(rs[av_pos].state);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (static_cast<int>(i) != av_pos) s.initial_states.push_back(rs[i].state);
    }
    s.av_index = 0;
    validateScenario(s, cfg, road);
    out.push_back(std::move(s));
  }
  return out;
}

void writeScenarios(const std::string& path, const std::vector<Scenario>& scenarios) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open for writing: " + path);
  out << kHeader << "\n";
  char buf[256];
  for (const auto& s : scenarios) {
    for (std::size_t i = 0; i < s.initial_states.size(); ++i) {
      const auto& v = s.initial_states[i];
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f,%.6f,%d",
                    s.scenario_id.c_str(), i, v.x, v.y, v.v, v.theta, i == 0 ? 1 : 0);
      out << buf << "\n";
    }
  }
}

Scenario sampleSynthetic(std::mt19937_64& rng, int vehicle_count,
                         const RoadConfig& road, const RewardConfig& cfg) {
  if (vehicle_count < 2) {
    throw Error(ErrorCode::InvalidArg, "sampleSynthetic: vehicle_count must be >= 2");
  }
  std::uniform_real_distribution<double> speed_dist(15.0, 30.0);
  std::uniform_real_distribution<double> gap_extra(0.0, 15.0);
  std::uniform_real_distribution<double> y0_dist(0.0, 10.0);
  std::uniform_int_distribution<int> lane_dist(0, road.lane_count - 1);

  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<VehicleState> placed;
    std::vector<double> lane_front_y(road.lane_count,
                                     -std::numeric_limits<double>::infinity());
    std::vector<double> lane_front_v(road.lane_count, 0.0);
    bool feasible = true;
    for (int k = 0; k < vehicle_count; ++k) {
      VehicleState s;
      const int lane = lane_dist(rng);
      s.x = road.laneCenter(lane);
      s.v = speed_dist(rng);
      s.theta = 0.0;
      if (std::isinf(lane_front_y[lane])) {
        s.y = y0_dist(rng);
      } else {
        // Keep the mandated 10 m minimum, widened when the new (leading)
        // vehicle would be approached fast by the one behind it.
        const double closing = std::max(0.0, lane_front_v[lane] - s.v);
        const double gap = std::max(10.0, closing * closing / 6.0 + 5.0) + gap_extra(rng);
        s.y = lane_front_y[lane] + cfg.footprint_length + gap;
      }
      if (s.y > road.length * 0.5) {
        feasible = false;
        break;
      }
      lane_front_y[lane] = s.y;
      lane_front_v[lane] = s.v;
      placed.push_back(s);
    }
    if (!feasible) continue;

    std::uniform_int_distribution<int> av_pick(0, vehicle_count - 1);
    const int av = av_pick(rng);
    Scenario out;
    out.scenario_id = "synthetic";
    out.initial_states.push_back(placed[av]);
    for (int k = 0; k < vehicle_count; ++k) {
      if (k != av) out.initial_states.push_back(placed[k]);
    }
    out.av_index = 0;

    bool ok = true;
    for (std::size_t i = 0; i < out.initial_states.size() && ok; ++i) {
      if (isOffRoad(out.initial_states[i], road)) ok = false;
      for (std::size_t j = i + 1; j < out.initial_states.size() && ok; ++j) {
        if (checkCollision(out.initial_states[i], out.initial_states[j], cfg)) ok = false;
      }
    }
    if (ok) return out;
  }
  throw Error(ErrorCode::Capacity,
              "sampleSynthetic: could not place " + std::to_string(vehicle_count) +
                  " vehicles on the configured road");
}

WorldState toWorldState(const Scenario& s) {
  WorldState w;
  w.vehicles = s.initial_states;
  w.step_index = 0;
  w.elapsed_time = 0.0;
  return w;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::InvalidArg, "ReplayBuffer: capacity must be positive");
  storage_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
  if (size_ < capacity_) {
    storage_.push_back(std::move(t));
    ++size_;
    next_ = size_ % capacity_;
  } else {
    storage_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch_size,
                                                    std::mt19937_64& rng) const {
  if (size_ < batch_size) {
    throw Error(ErrorCode::NotReady, "ReplayBuffer: " + std::to_string(size_) +
                                         " transitions stored, batch of " +
                                         std::to_string(batch_size) + " requested");
  }
  std::vector<const Transition*> out(batch_size);
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  for (std::size_t i = 0; i < batch_size; ++i) out[i] = &storage_[pick(rng)];
  return out;
}

void ReplayBuffer::clear() {
  storage_.clear();
  next_ = 0;
  size_ = 0;
}

}  // namespace sdm::scenario
