// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "qselect/core.hpp"

namespace qselect {

/// Members and positive weights of an ensemble; weights are normalized to
/// sum to one when combining. Empty weights mean uniform.
struct EnsembleSpec {
  std::vector<Method> members;
  std::vector<double> weights;

  static EnsembleSpec from_method(const Method& ensemble);
  Method method() const;
  std::vector<double> normalized_weights() const;
};

/// (x - min) / (max - min) over the entries not marked in `excluded`;
/// a constant vector maps to 0.5 and excluded entries map to 0.
ScoreVector minmax_normalize(const ScoreVector& v, const std::vector<bool>& excluded = {});

/// Weighted mean of the min-max normalized member vectors. `vectors[i]`
/// must carry `spec.members[i]`'s method.
ScoreVector combine(const std::vector<ScoreVector>& vectors, const EnsembleSpec& spec,
                    const std::vector<bool>& excluded = {});

/// Argmax over entries not marked in `excluded`; ties go to the lowest index
/// and set `tie_broken`. Throws InvalidArgument when nothing is eligible.
SelectionResult select(const ScoreVector& v, const std::vector<bool>& excluded = {});

/// Normalizes, combines and selects in one step. The result carries the
/// weighted mean of raw member scores as `raw_scores` and the combined
/// normalized vector as `normalized_scores`.
SelectionResult select_ensemble(const std::vector<ScoreVector>& vectors, const EnsembleSpec& spec,
                                const std::vector<bool>& excluded = {});

}  // namespace qselect
