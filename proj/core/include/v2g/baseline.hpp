#pragma once

#include "v2g/domain.hpp"

namespace v2g {

/// Uncontrolled charging: every vehicle charges at full speed from arrival
/// until the battery is full (the last period at a partial rate), never
/// discharges, and the grid covers whatever wind does not.
Schedule bau_schedule(const Scenario& scenario);

}  // namespace v2g
