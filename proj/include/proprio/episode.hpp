#pragma once

#include <Eigen/Dense>

namespace proprio {

// Body-only record of one episode: what the dynamics model is allowed to see.
// Row t holds the action taken at step t+1 and the sensors it produced.
struct Episode {
  Eigen::MatrixXd actions;       // T x F
  Eigen::MatrixXd observations;  // T x D
  int length() const { return static_cast<int>(actions.rows()); }
};

}  // namespace proprio
