// Copyright 2026 The Strider Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "strider/robot_model.hpp"
#include "strider/types.hpp"

namespace strider {

/// Ordered set of active point contacts, by contact-frame index.
/// Each active contact contributes one 3-vector of world-frame forces
/// (x, y, z); planar models keep the y component, whose Jacobian columns are
/// zero, so every downstream consumer is dimension-uniform.
struct ContactSet {
  std::vector<int> frames;
  std::vector<std::string> names;

  int count() const { return static_cast<int>(frames.size()); }
  int forceDim() const { return 3 * count(); }

  bool contains(const std::string& frameName) const {
    return std::find(names.begin(), names.end(), frameName) != names.end();
  }
  int localIndex(const std::string& frameName) const {
    auto it = std::find(names.begin(), names.end(), frameName);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
  }
};

inline ContactSet makeContactSet(const RobotModel& model, const std::vector<std::string>& frameNames) {
  ContactSet set;
  for (const auto& n : frameNames) {
    const int idx = model.contactFrameIndex(n);  // throws on unknown frames
    if (set.contains(n)) throw ModelError("contact set lists frame twice: " + n);
    set.frames.push_back(idx);
    set.names.push_back(n);
  }
  return set;
}

/// Stacked kinematics of the active contacts: positions, velocities,
/// Jacobian (3k x n_v) and the drift term Jdot * v.
struct ContactKinematics {
  matrix_t jacobian;
  vector_t jdotV;
  vector_t positions;
  vector_t velocities;
};

inline ContactKinematics stackContactKinematics(const RobotModel& model, const Kinematics& kin,
                                                const ContactSet& set) {
  ContactKinematics out;
  const int k = set.count();
  out.jacobian = matrix_t::Zero(3 * k, model.nv());
  out.jdotV = vector_t::Zero(3 * k);
  out.positions = vector_t::Zero(3 * k);
  out.velocities = vector_t::Zero(3 * k);
  for (int i = 0; i < k; ++i) {
    const FramePointData fd = model.pointKinematics(kin, set.frames[i]);
    out.jacobian.middleRows<3>(3 * i) = fd.jacobian;
    out.jdotV.segment<3>(3 * i) = fd.jdotV;
    out.positions.segment<3>(3 * i) = fd.position;
    out.velocities.segment<3>(3 * i) = fd.velocity;
  }
  return out;
}

/// Linear force constraints C * lambda <= n for the active contacts.
///
/// Per contact the rows are the four tangential pyramid faces
/// (+-lambda_x, +-lambda_y vs (mu/sqrt(2)) * lambda_z), unilaterality
/// (-lambda_z <= 0) and, when `fzMax` is finite and positive, a normal-force
/// cap (lambda_z <= fzMax).  The pyramid is an inner approximation of the
/// friction cone ||lambda_t|| <= mu * lambda_z.
struct FrictionPyramid {
  matrix_t C;
  vector_t n;
  int rowsPerContact = 0;
};

inline FrictionPyramid frictionPyramid(const RobotModel& model, const ContactSet& set,
                                       scalar_t fzMax = -1.0) {
  const bool withCap = std::isfinite(fzMax) && fzMax > 0.0;
  const int rows = withCap ? 6 : 5;
  FrictionPyramid out;
  out.rowsPerContact = rows;
  const int k = set.count();
  out.C = matrix_t::Zero(rows * k, 3 * k);
  out.n = vector_t::Zero(rows * k);
  for (int i = 0; i < k; ++i) {
    const scalar_t muEff = model.contactFrames()[set.frames[i]].mu / std::sqrt(2.0);
    const int r = rows * i;
    const int c = 3 * i;
    out.C(r + 0, c + 0) = 1.0;
    out.C(r + 0, c + 2) = -muEff;
    out.C(r + 1, c + 0) = -1.0;
    out.C(r + 1, c + 2) = -muEff;
    out.C(r + 2, c + 1) = 1.0;
    out.C(r + 2, c + 2) = -muEff;
    out.C(r + 3, c + 1) = -1.0;
    out.C(r + 3, c + 2) = -muEff;
    out.C(r + 4, c + 2) = -1.0;
    if (withCap) {
      out.C(r + 5, c + 2) = 1.0;
      out.n(r + 5) = fzMax;
    }
  }
  return out;
}

/// Projects stacked forces into the strict interior of the pyramid:
/// the normal force is raised so every row keeps at least `margin` of slack
/// and the tangential components are shrunk toward the cone axis if needed.
/// Used to seed barrier expansions from boundary points.
inline vector_t clampIntoPyramid(const RobotModel& model, const ContactSet& set,
                                 const vector_t& lambda, scalar_t margin, scalar_t fzMax = -1.0) {
  vector_t out = lambda;
  const bool withCap = std::isfinite(fzMax) && fzMax > 0.0;
  for (int i = 0; i < set.count(); ++i) {
    const scalar_t muEff = model.contactFrames()[set.frames[i]].mu / std::sqrt(2.0);
    auto f = out.segment<3>(3 * i);
    scalar_t fzLo = margin;  // unilateral row slack
    if (withCap) f.z() = std::min(f.z(), fzMax - margin);
    f.z() = std::max(f.z(), fzLo);
    const scalar_t tMax = muEff * f.z() - margin;
    if (tMax <= 0.0) {
      // Not enough normal force to leave tangential slack: raise it.
      f.z() = std::max(f.z(), 2.0 * margin / muEff);
      f.x() = 0.0;
      f.y() = 0.0;
      continue;
    }
    f.x() = std::clamp(f.x(), -tMax, tMax);
    f.y() = std::clamp(f.y(), -tMax, tMax);
  }
  return out;
}

}  // namespace strider
