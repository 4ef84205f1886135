#include "flicker/agents/checkpoint.hpp"

#include <fstream>

#include "flicker/common/binary_io.hpp"

namespace flicker {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'K', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint64_t kVersion = 1;

std::string describe(const ModelConfig& c) {
  std::string s = std::string(backbone_name(c.backbone)) + " fw=" + std::to_string(c.feature_width) +
                  " token=" + std::to_string(c.token_dim) + " heads=" + std::to_string(c.attention_heads) +
                  " rnn=" + std::to_string(c.rnn_input_dim) + "/" + std::to_string(c.rnn_hidden_dim) +
                  " mix=" + std::to_string(c.mixing_embed_dim) + " hyper=" + std::to_string(c.hypernet_embed_dim) +
                  " " + std::string(hyper_activation_name(c.hyper_activation)) + " slots=[";
  for (std::size_t i = 0; i < c.slots.size(); ++i) s += (i ? "," : "") + std::to_string(c.slots[i]);
  return s + "]";
}

bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
  return a.backbone == b.backbone && a.feature_width == b.feature_width && a.type_count == b.type_count &&
         a.agent_type == b.agent_type && a.token_dim == b.token_dim && a.attention_heads == b.attention_heads &&
         a.rnn_input_dim == b.rnn_input_dim && a.rnn_hidden_dim == b.rnn_hidden_dim &&
         a.mixing_embed_dim == b.mixing_embed_dim && a.hypernet_embed_dim == b.hypernet_embed_dim &&
         a.hyper_activation == b.hyper_activation && (a.backbone != Backbone::Mlp || a.slots == b.slots);
}

std::ifstream open_checked(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw CheckpointMismatch(path.string() + ": not a checkpoint file");
  }
  const auto version = io::read_u64(in);
  if (version != kVersion) {
    throw CheckpointMismatch(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  return in;
}

}  // namespace

void write_model_config(std::ostream& os, const ModelConfig& c) {
  io::write_u64(os, static_cast<std::uint64_t>(c.backbone));
  io::write_u64(os, c.feature_width);
  io::write_u64(os, c.type_count);
  io::write_i64(os, c.agent_type);
  std::vector<std::int64_t> slots(c.slots.begin(), c.slots.end());
  io::write_i64s(os, slots);
  io::write_u64(os, c.token_dim);
  io::write_u64(os, c.attention_heads);
  io::write_u64(os, c.rnn_input_dim);
  io::write_u64(os, c.rnn_hidden_dim);
  io::write_u64(os, c.mixing_embed_dim);
  io::write_u64(os, c.hypernet_embed_dim);
  io::write_u64(os, static_cast<std::uint64_t>(c.hyper_activation));
}

ModelConfig read_model_config(std::istream& is) {
  ModelConfig c;
  const auto backbone = io::read_u64(is);
  if (backbone > 1) throw CheckpointMismatch("checkpoint: unknown backbone tag");
  c.backbone = static_cast<Backbone>(backbone);
  c.feature_width = io::read_u64(is);
  c.type_count = io::read_u64(is);
  c.agent_type = static_cast<int>(io::read_i64(is));
  for (auto s : io::read_i64s(is)) c.slots.push_back(static_cast<int>(s));
  c.token_dim = io::read_u64(is);
  c.attention_heads = io::read_u64(is);
  c.rnn_input_dim = io::read_u64(is);
  c.rnn_hidden_dim = io::read_u64(is);
  c.mixing_embed_dim = io::read_u64(is);
  c.hypernet_embed_dim = io::read_u64(is);
  const auto act = io::read_u64(is);
  if (act > 1) throw CheckpointMismatch("checkpoint: unknown hypernet activation tag");
  c.hyper_activation = static_cast<HyperActivation>(act);
  return c;
}

void write_parameters(std::ostream& os, const ParameterSet& params) {
  io::write_u64(os, params.size());
  for (const auto& p : params) {
    io::write_string(os, p.name);
    io::write_tensor(os, p.value);
  }
}

void read_parameters(std::istream& is, ParameterSet& params) {
  const auto n = io::read_u64(is);
  if (n != params.size()) {
    throw CheckpointMismatch("checkpoint holds " + std::to_string(n) + " tensors, network has " +
                             std::to_string(params.size()));
  }
  std::vector<Tensor> values;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = io::read_string(is);
    Tensor t = io::read_tensor(is);
    if (name != params[i].name) {
      throw CheckpointMismatch("checkpoint tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                               params[i].name + "'");
    }
    if (t.shape() != params[i].value.shape()) {
      throw CheckpointMismatch("checkpoint tensor '" + name + "' has shape " + t.shape_string() + ", expected " +
                               params[i].value.shape_string());
    }
    values.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < n; ++i) params[i].value = std::move(values[i]);
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ParameterSet& params) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out.write(kMagic, 8);
    io::write_u64(out, kVersion);
    write_model_config(out, config);
    write_parameters(out, params);
    out.flush();
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  auto in = open_checked(path);
  return read_model_config(in);
}

void load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected, ParameterSet& params) {
  auto in = open_checked(path);
  const ModelConfig stored = read_model_config(in);
  if (!same_architecture(stored, expected)) {
    throw CheckpointMismatch(path.string() + ": checkpoint is " + describe(stored) + ", preset expects " +
                             describe(expected));
  }
  read_parameters(in, params);
}

}  // namespace flicker
