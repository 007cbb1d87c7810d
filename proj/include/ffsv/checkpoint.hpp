#pragma once

#include <map>
#include <string>
#include <vector>

#include "ffsv/network.hpp"

namespace ffsv {

// Checkpoint container: magic "FFNN", u32 version, then named tensors
// (u32 name length, name bytes, u32 rank, u32 dims, float32 LE data).
void save_checkpoint(MicroNet& net, const std::string& path);

// Loads by name; every net parameter must be present with matching shape and
// no unknown tensors may remain.
void load_checkpoint(MicroNet& net, const std::string& path);

// Tensor names and shapes only, for rebuilding a net around a checkpoint
// (head sizes are encoded in the head weight shapes).
std::map<std::string, std::vector<int>> read_checkpoint_shapes(const std::string& path);

}  // namespace ffsv
