#include "vlqa/checkpoint.h"

#include <bit>
#include <cstring>

#include "vlqa/dataset_io.h"
#include "vlqa/errors.h"

namespace vlqa {
namespace {

constexpr char kMagic[] = "VLQACKPT";
constexpr std::size_t kMagicSize = 8;
constexpr const char* kVelocityPrefix = "opt/velocity/";

void PutLe(std::string& out, std::uint64_t v, std::size_t bytes) {
  for (std::size_t i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t GetLe(const std::string& in, std::size_t& pos, std::size_t bytes) {
  if (pos + bytes > in.size()) throw Error(ErrorKind::kSchema, "checkpoint truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += bytes;
  return v;
}

}  // namespace

std::string SerializeCheckpoint(const Checkpoint& c) {
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<const Tensor*> order;
  for (const auto& [name, entry] : *c.params) {
    tensors.push_back({{"name", name}, {"shape", entry.value.shape()}});
    order.push_back(&entry.value);
  }
  for (const auto& [name, v] : c.velocity) {
    tensors.push_back({{"name", kVelocityPrefix + name}, {"shape", v.shape()}});
    order.push_back(&v);
  }
  const nlohmann::json header = {{"config", ConfigToJson(c.config)},
                                 {"model", ModelSpecToJson(c.spec)},
                                 {"step", c.step},
                                 {"tensors", tensors}};
  const std::string text = header.dump();
  std::string out(kMagic, kMagicSize);
  PutLe(out, kCheckpointVersion, 4);
  PutLe(out, text.size(), 8);
  out += text;
  for (const Tensor* t : order)
    for (double x : t->data()) PutLe(out, std::bit_cast<std::uint64_t>(x), 8);
  return out;
}

Checkpoint DeserializeCheckpoint(const std::string& bytes) {
  if (bytes.size() < kMagicSize || bytes.compare(0, kMagicSize, kMagic) != 0) {
    throw Error(ErrorKind::kSchema, "not a checkpoint file (bad magic)");
  }
  std::size_t pos = kMagicSize;
  const auto version = static_cast<std::uint32_t>(GetLe(bytes, pos, 4));
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kSchema, "checkpoint format version " + std::to_string(version) +
                                        " but this build reads version " + std::to_string(kCheckpointVersion));
  }
  const std::uint64_t header_len = GetLe(bytes, pos, 8);
  if (pos + header_len > bytes.size()) throw Error(ErrorKind::kSchema, "checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kSchema, std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;

  Checkpoint c;
  c.config = ConfigFromJson(header.at("config"));
  c.spec = ModelSpecFromJson(header.at("model"));
  c.step = header.at("step").get<std::size_t>();
  c.params = std::make_shared<ParameterStore>();
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    Tensor t(entry.at("shape").get<Shape>());
    for (double& x : t.mutable_data()) x = std::bit_cast<double>(GetLe(bytes, pos, 8));
    if (name.rfind(kVelocityPrefix, 0) == 0) {
      c.velocity.emplace(name.substr(std::strlen(kVelocityPrefix)), std::move(t));
    } else {
      c.params->Add(name, std::move(t));
    }
  }
  if (pos != bytes.size()) throw Error(ErrorKind::kSchema, "checkpoint has trailing bytes");
  return c;
}

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  WriteTextFile(path, SerializeCheckpoint(checkpoint));
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) { return DeserializeCheckpoint(ReadTextFile(path)); }

}  // namespace vlqa
