#pragma once

#include <string>
#include <vector>

#include "dbnet/hardnet.hpp"
#include "dbnet/netspec.hpp"
#include "dbnet/softnet.hpp"

namespace dbnet {

enum class Aspect { Soft, Hard };

// On-disk model: a JSON header (format version, NetSpec, seed, provenance)
// followed by a raw payload. Soft payload: little-endian float32 weights in
// layer order, row-major. Hard payload: per-layer packed bytes, bit i of a
// block at bytes[i/8] bit position i%8.
struct ModelFile {
  int version = 1;
  Aspect aspect = Aspect::Soft;
  uint64_t seed = 0;
  std::string provenance;
  NetSpec spec;
  std::vector<float> soft_weights;
  std::vector<HardVec> hard_blocks;
};

void save_model(const std::string& path, const ModelFile& m);
ModelFile load_model(const std::string& path);

ModelFile soft_model_from(const SoftNet& net, uint64_t seed,
                          std::string provenance);
SoftNet to_soft_net(const ModelFile& m);
HardNet to_hard_net(const ModelFile& m);
// Thresholds the soft payload into a hard model.
ModelFile harden_model(const ModelFile& soft);

std::string netspec_to_json(const NetSpec& spec);
NetSpec netspec_from_json(const std::string& text);

}  // namespace dbnet
