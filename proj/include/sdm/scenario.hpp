#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sdm/sim.hpp"

namespace sdm::scenario {

// Initial states for one episode; vehicle 0 is the AV after normalization.
struct Scenario {
  std::string scenario_id;
  std::vector<VehicleState> initial_states;
  int av_index = 0;
  int vehicleCount() const { return static_cast<int>(initial_states.size()); }
};

// CSV schema (header required):
//   scenario_id,vehicle_id,x_m,y_m,v_mps,theta_rad,is_av
// One row per vehicle, exactly one is_av=1 row per scenario_id.
std::vector<Scenario> loadScenarios(const std::string& path, const RewardConfig& cfg,
                                    const RoadConfig& road);
void writeScenarios(const std::string& path, const std::vector<Scenario>& scenarios);

// Collision-free placement at lane centers: within-lane gaps of at least
// 10 m (wider when the rear vehicle approaches fast), speeds uniform in
// [15, 30] m/s, AV at index 0. Resamples until collision-free; throws a
// capacity error when the road cannot fit the request.
Scenario sampleSynthetic(std::mt19937_64& rng, int vehicle_count,
                         const RoadConfig& road, const RewardConfig& cfg);

void validateScenario(const Scenario& s, const RewardConfig& cfg,
                      const RoadConfig& road);

WorldState toWorldState(const Scenario& s);

// Standardized replay record.
struct Transition {
  std::vector<double> s;       // flattened [x, y, v, theta] per vehicle
  std::vector<double> a_av;    // executed AV action
  std::vector<double> a_bv;    // executed BV actions, concatenated
  double r_av = 0.0;
  double r_bv = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

// Ring buffer with uniform with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return storage_[i]; }
  std::size_t writeIndex() const { return next_; }

  // Requires size() >= batch_size.
  std::vector<const Transition*> sample(std::size_t batch_size,
                                        std::mt19937_64& rng) const;
  void clear();

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  std::vector<Transition> storage_;
};

}  // namespace sdm::scenario
