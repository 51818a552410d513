#pragma once

#include <string>
#include <vector>

#include "molbuild/alphabet.hpp"
#include "molbuild/policy.hpp"

namespace molbuild {

struct Checkpoint {
  PolicyConfig config;
  Alphabet alphabet;
  std::vector<float> params;
};

/// Binary layout: "GXF1", u32 LE manifest length, JSON manifest
/// {config, alphabet, alphabet_hash, tensors:[{name, shape}]}, float32 LE
/// tensor data in manifest order, u32 LE CRC-32 of everything before it.
void save_checkpoint(const std::string& path, const Policy<float>& policy, const Alphabet& alphabet);
Checkpoint load_checkpoint(const std::string& path);

/// Loads and checks that the stored alphabet equals `expected`
/// (AlphabetMismatch otherwise).
Checkpoint load_checkpoint(const std::string& path, const Alphabet& expected);

/// Hex CRC-32 of a file's bytes, used in run manifests.
std::string file_digest(const std::string& path);

}  // namespace molbuild
