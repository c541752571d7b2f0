#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "vlqa/autodiff.h"
#include "vlqa/config.h"
#include "vlqa/model.h"

// Binary container: "VLQACKPT", uint32 LE version, uint64 LE header length,
// JSON header, then every tensor listed in the header as raw little-endian
// float64 values in header order.
namespace vlqa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  ModelSpec spec;
  std::size_t step = 0;
  std::shared_ptr<ParameterStore> params;
  std::map<std::string, Tensor> velocity;
};

std::string SerializeCheckpoint(const Checkpoint& checkpoint);
Checkpoint DeserializeCheckpoint(const std::string& bytes);

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace vlqa
