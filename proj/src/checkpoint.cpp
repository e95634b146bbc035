#include <cstring>
#include <fstream>
#include <limits>

#include "egd/models.hpp"
#include "json.hpp"

namespace egd::models {

static_assert(std::numeric_limits<float>::is_iec559, "IEEE-754 float payload required");

namespace {

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

uint32_t get_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void put_f32le(std::string& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32le(out, bits);
}

float get_f32le(const unsigned char* p) {
  const uint32_t bits = get_u32le(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

nlohmann::ordered_json meta_json(Network& net, const CheckpointMeta& meta) {
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointVersion;
  j["tool_version"] = kToolVersion;
  j["architecture"] = architecture_name(meta.config.arch);
  j["config"] = nlohmann::ordered_json::parse(config_to_json(meta.config));
  j["channel_stats"] = {{"mean", meta.stats.mean},
                        {"std", meta.stats.stddev},
                        {"provenance", meta.stats.provenance}};
  j["setup"] = meta.setup;
  j["scope"] = {{"task", meta.scope_task}, {"gesture", meta.scope_gesture}};
  j["seed"] = meta.config.seed;
  j["train_steps"] = meta.train_steps;

  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  size_t offset = 0;
  for (ndgrad::Param* p : net.state_tensors()) {
    nlohmann::ordered_json e;
    e["name"] = p->name;
    std::vector<int> shape(p->value.dims.begin(), p->value.dims.begin() + p->value.nd);
    e["shape"] = shape;
    e["offset"] = offset;
    e["count"] = p->value.size();
    offset += p->value.size();
    manifest.push_back(e);
  }
  j["params"] = manifest;
  return j;
}

}  // namespace

void save_checkpoint(Network& net, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  const std::string meta_text = meta_json(net, meta).dump();

  std::string out;
  out.append(kCheckpointMagic, 4);
  put_u32le(out, static_cast<uint32_t>(meta_text.size()));
  out += meta_text;
  for (ndgrad::Param* p : net.state_tensors())
    for (double v : p->value.v) put_f32le(out, static_cast<float>(v));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("checkpoint: cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointMagicError("not a checkpoint: bad magic in " + path.string());
  const uint32_t meta_len = get_u32le(p + 4);
  if (bytes.size() < 8 + static_cast<size_t>(meta_len))
    throw CheckpointTruncatedError("checkpoint truncated inside metadata");

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(8, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointManifestError(std::string("checkpoint metadata not parseable: ") +
                                  e.what());
  }

  if (!j.contains("format_version") || j["format_version"].get<uint32_t>() != kCheckpointVersion)
    throw CheckpointMagicError("unsupported checkpoint format version");

  LoadedCheckpoint lc;
  ModelConfig cfg;
  const auto arch = parse_architecture(j.at("architecture").get<std::string>());
  if (!arch) throw CheckpointManifestError("unknown architecture in checkpoint");
  cfg.arch = *arch;
  try {
    const auto& cj = j.at("config");
    for (auto it = cj.begin(); it != cj.end(); ++it) {
      // reuse the override machinery key by key, architecture included above
      if (it.key() == "architecture") continue;
      nlohmann::json single;
      single[it.key()] = *it;
      apply_config_overrides(cfg, single.dump());
    }
  } catch (const ValidationError& e) {
    throw CheckpointManifestError(std::string("bad checkpoint config: ") + e.what());
  }

  lc.net = Network::build(cfg);
  lc.meta.config = cfg;
  lc.meta.setup = j.value("setup", std::string{});
  if (j.contains("scope")) {
    lc.meta.scope_task = j["scope"].value("task", std::string{});
    lc.meta.scope_gesture = j["scope"].value("gesture", std::string{});
  }
  lc.meta.train_steps = j.value("train_steps", uint64_t{0});
  if (j.contains("channel_stats")) {
    lc.meta.stats.mean = j["channel_stats"].at("mean").get<std::vector<double>>();
    lc.meta.stats.stddev = j["channel_stats"].at("std").get<std::vector<double>>();
    lc.meta.stats.provenance = j["channel_stats"].value("provenance", std::string{});
  }

  const auto params = lc.net.state_tensors();
  const auto& manifest = j.at("params");
  if (manifest.size() != params.size())
    throw CheckpointManifestError("checkpoint manifest: parameter count mismatch");

  size_t expected_offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = manifest[i];
    if (e.at("name").get<std::string>() != params[i]->name)
      throw CheckpointManifestError("checkpoint manifest: name mismatch at " +
                                    params[i]->name);
    const auto shape = e.at("shape").get<std::vector<int>>();
    const Tensor& t = params[i]->value;
    if (static_cast<int>(shape.size()) != t.nd ||
        !std::equal(shape.begin(), shape.end(), t.dims.begin()))
      throw CheckpointManifestError("checkpoint manifest: shape mismatch at " +
                                    params[i]->name);
    if (e.at("offset").get<size_t>() != expected_offset ||
        e.at("count").get<size_t>() != t.size())
      throw CheckpointManifestError("checkpoint manifest: layout mismatch at " +
                                    params[i]->name);
    expected_offset += t.size();
  }

  const size_t payload_at = 8 + meta_len;
  if (bytes.size() < payload_at + expected_offset * 4)
    throw CheckpointTruncatedError("checkpoint truncated inside parameter payload");

  size_t pos = payload_at;
  for (ndgrad::Param* prm : params)
    for (double& v : prm->value.v) {
      v = static_cast<double>(get_f32le(p + pos));
      pos += 4;
    }

  lc.net.train_steps = lc.meta.train_steps;
  if (lc.meta.train_steps > 0) lc.net.mark_batchnorm_ready();
  return lc;
}

}  // namespace egd::models
