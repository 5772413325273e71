#include "rankscl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "rankscl/errors.hpp"

namespace rankscl {
namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'R', 'S', 'C', 'L'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

struct TensorSlot {
  std::string name;
  Tensor<float>* tensor;
};

// Payload order: parameters, buffers, then Adam first and second moments.
std::vector<TensorSlot> tensor_slots(ModelState<float>& model) {
  std::vector<TensorSlot> slots;
  auto params = model.parameters();
  for (auto& p : params) slots.push_back({p.name, p.tensor});
  for (auto& b : model.buffers()) slots.push_back({b.name, b.tensor});
  for (std::size_t i = 0; i < params.size() && i < model.adam.size(); ++i) {
    slots.push_back({"adam.m." + params[i].name, &model.adam[i].m});
    slots.push_back({"adam.v." + params[i].name, &model.adam[i].v});
  }
  return slots;
}

const char* mode_name(Mode mode) { return mode == Mode::train ? "train" : "eval"; }

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw CheckpointError("checkpoint " + field + ": " + what);
}

}  // namespace

void save_checkpoint(const ModelState<float>& model, const std::filesystem::path& path) {
  save_checkpoint(Checkpoint{model, std::nullopt}, path);
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  ModelState<float> model = checkpoint.model;
  const auto params = model.parameters();
  if (model.adam.size() != params.size()) {
    fail("adam", "expected one optimizer state per parameter");
  }

  json meta;
  meta["format"] = "rankscl-checkpoint";
  const EncoderConfig& c = model.config;
  meta["config"] = {{"in_features", c.in_features},
                    {"conv_channels", c.conv_channels},
                    {"kernel_sizes", c.kernel_sizes},
                    {"repr_dim", c.repr_dim},
                    {"dense_repr", c.dense_repr}};
  meta["rng_seed"] = model.rng_seed;
  json bn = json::array();
  for (const auto& block : model.blocks) {
    bn.push_back({{"momentum", block.bn.momentum},
                  {"epsilon", block.bn.epsilon},
                  {"mode", mode_name(block.bn.mode)}});
  }
  meta["batchnorm"] = std::move(bn);
  json adam = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const AdamState<float>& s = model.adam[i];
    adam.push_back({{"name", params[i].name},
                    {"step_count", s.step_count},
                    {"learning_rate", s.hyper.learning_rate},
                    {"weight_decay", s.hyper.weight_decay},
                    {"beta1", s.hyper.beta1},
                    {"beta2", s.hyper.beta2},
                    {"epsilon", s.hyper.epsilon}});
  }
  meta["adam"] = std::move(adam);
  if (checkpoint.normalization) {
    meta["normalization"] = {{"mean", checkpoint.normalization->mean},
                             {"stddev", checkpoint.normalization->stddev}};
  }

  const auto slots = tensor_slots(model);
  json tensors = json::array();
  for (const auto& slot : slots) {
    tensors.push_back({{"name", slot.name}, {"shape", slot.tensor->shape()}});
  }
  meta["tensors"] = std::move(tensors);

  const std::string meta_text = meta.dump();
  std::string bytes(kMagic, 4);
  put_u32(bytes, kCheckpointVersion);
  put_u32(bytes, static_cast<std::uint32_t>(meta_text.size()));
  bytes += meta_text;
  for (const auto& slot : slots) {
    for (float v : slot.tensor->values()) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail("magic", "expected \"RSCL\"");
  }
  if (bytes.size() < 8) fail("version", "file truncated");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    fail("version", "unsupported version " + std::to_string(version));
  }
  if (bytes.size() < 12) fail("metadata", "file truncated");
  const std::uint32_t meta_len = get_u32(bytes, 8);
  if (bytes.size() - 12 < meta_len) fail("metadata", "file truncated");

  json meta;
  try {
    meta = json::parse(bytes.begin() + 12, bytes.begin() + 12 + meta_len);
  } catch (const json::exception& e) {
    fail("metadata", std::string("invalid JSON: ") + e.what());
  }

  Checkpoint ck;
  try {
    const json& c = meta.at("config");
    EncoderConfig config;
    config.in_features = c.at("in_features").get<std::size_t>();
    config.conv_channels = c.at("conv_channels").get<std::vector<std::size_t>>();
    config.kernel_sizes = c.at("kernel_sizes").get<std::vector<std::size_t>>();
    config.repr_dim = c.at("repr_dim").get<std::size_t>();
    config.dense_repr = c.at("dense_repr").get<bool>();
    try {
      config.validate();
    } catch (const ConfigError& e) {
      fail("config", e.what());
    }
    ck.model = init_model<float>(config, meta.at("rng_seed").get<std::uint64_t>());

    const json& bn = meta.at("batchnorm");
    if (!bn.is_array() || bn.size() != ck.model.blocks.size()) {
      fail("batchnorm", "expected one entry per conv block");
    }
    for (std::size_t i = 0; i < bn.size(); ++i) {
      auto& state = ck.model.blocks[i].bn;
      state.momentum = bn[i].at("momentum").get<double>();
      state.epsilon = bn[i].at("epsilon").get<double>();
      const auto mode = bn[i].at("mode").get<std::string>();
      if (mode != "train" && mode != "eval") fail("batchnorm", "unknown mode '" + mode + "'");
      state.mode = mode == "train" ? Mode::train : Mode::eval;
    }

    const auto params = ck.model.parameters();
    const json& adam = meta.at("adam");
    if (!adam.is_array() || adam.size() != params.size()) {
      fail("adam", "expected one entry per parameter");
    }
    for (std::size_t i = 0; i < adam.size(); ++i) {
      if (adam[i].at("name").get<std::string>() != params[i].name) {
        fail("adam", "entry " + std::to_string(i) + " is not '" + params[i].name + "'");
      }
      AdamState<float>& s = ck.model.adam[i];
      s.step_count = adam[i].at("step_count").get<std::uint64_t>();
      s.hyper.learning_rate = adam[i].at("learning_rate").get<double>();
      s.hyper.weight_decay = adam[i].at("weight_decay").get<double>();
      s.hyper.beta1 = adam[i].at("beta1").get<double>();
      s.hyper.beta2 = adam[i].at("beta2").get<double>();
      s.hyper.epsilon = adam[i].at("epsilon").get<double>();
    }

    if (meta.contains("normalization")) {
      NormStats stats;
      stats.mean = meta["normalization"].at("mean").get<std::vector<double>>();
      stats.stddev = meta["normalization"].at("stddev").get<std::vector<double>>();
      if (stats.mean.size() != stats.stddev.size() ||
          (stats.mean.size() != 1 && stats.mean.size() != config.in_features)) {
        fail("normalization", "statistics do not match in_features");
      }
      ck.normalization = std::move(stats);
    }

    auto slots = tensor_slots(ck.model);
    const json& tensors = meta.at("tensors");
    if (!tensors.is_array() || tensors.size() != slots.size()) {
      fail("tensors", "expected " + std::to_string(slots.size()) + " entries");
    }
    std::size_t total = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto name = tensors[i].at("name").get<std::string>();
      if (name != slots[i].name) {
        fail("tensors", "entry " + std::to_string(i) + " is '" + name + "', expected '" +
                            slots[i].name + "'");
      }
      const auto shape = tensors[i].at("shape").get<Shape>();
      if (shape != slots[i].tensor->shape()) {
        fail("tensors", "'" + name + "' has shape " + shape_string(shape) + ", architecture needs " +
                            shape_string(slots[i].tensor->shape()));
      }
      total += slots[i].tensor->size();
    }

    const std::size_t offset = 12 + meta_len;
    if (bytes.size() - offset != total * 4) {
      fail("payload", "expected " + std::to_string(total * 4) + " bytes of tensor data, found " +
                          std::to_string(bytes.size() - offset));
    }
    std::size_t pos = offset;
    for (auto& slot : slots) {
      for (float& v : slot.tensor->values()) {
        v = std::bit_cast<float>(get_u32(bytes, pos));
        pos += 4;
      }
    }
  } catch (const json::exception& e) {
    fail("metadata", e.what());
  }
  return ck;
}

}  // namespace rankscl
