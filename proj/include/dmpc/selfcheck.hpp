#pragma once

#include <ostream>
#include <string>

namespace dmpc {

// Fast property suite: tilting identity, reverse-mode gradient check,
// Riccati self-consistency, ZOH vs order-40 Taylor. Prints one line per
// check; returns true when everything passed.
bool run_selfcheck(std::ostream& os);

// Structural validation of a checkpoint file (magic, manifest, dims,
// finite parameters).
bool check_checkpoint(const std::string& path, std::ostream& os);

}  // namespace dmpc
