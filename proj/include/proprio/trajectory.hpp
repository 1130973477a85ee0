#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "proprio/env.hpp"
#include "proprio/episode.hpp"

namespace proprio {

// A recorded episode plus everything the dynamics model must never see:
// the object (diagnostic label), the seed, and the grasp phase markers.
struct Trajectory {
  std::int64_t episode_id = 0;
  std::uint64_t seed = 0;
  Episode body;
  ObjectSpec label;
  std::vector<std::pair<int, bool>> markers;  // (timestep, open pose?)
};

}  // namespace proprio
