#include "ctxsel/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "ctxsel/errors.hpp"

namespace ctxsel {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'X', 'S', 'E', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_tensor(std::ofstream& out, const std::string& name, const Matrix& m) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(out, m.rows());
  write_u64(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix scalar_tensor(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

struct Reader {
  std::ifstream in;
  std::string path;

  void read_bytes(void* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
      throw CorruptionError("truncated checkpoint file " + path);
    }
  }
  std::uint32_t read_u32() {
    std::uint32_t v = 0;
    read_bytes(&v, sizeof(v));
    return v;
  }
  std::uint64_t read_u64() {
    std::uint64_t v = 0;
    read_bytes(&v, sizeof(v));
    return v;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");

  std::vector<std::pair<std::string, Matrix>> tensors;
  tensors.emplace_back("policy.config",
                       Matrix(1, 3,
                              {static_cast<double>(ck.policy.config.dim),
                               static_cast<double>(ck.policy.config.cross_attention_blocks),
                               static_cast<double>(ck.policy.config.linear_layers)}));
  for (const auto& [name, tensor] : ck.policy.named_tensors()) tensors.emplace_back(name, *tensor);
  for (std::size_t i = 0; i < ck.optimizer.m.size(); ++i) {
    tensors.emplace_back("opt.m." + std::to_string(i), ck.optimizer.m[i]);
    tensors.emplace_back("opt.v." + std::to_string(i), ck.optimizer.v[i]);
  }
  tensors.emplace_back("opt.step", scalar_tensor(static_cast<double>(ck.optimizer.step)));
  tensors.emplace_back("scenes_done", scalar_tensor(static_cast<double>(ck.scenes_done)));
  tensors.emplace_back("segment_count", scalar_tensor(static_cast<double>(ck.segments.size())));
  for (std::size_t s = 0; s < ck.segments.size(); ++s) {
    const SegmentState& seg = ck.segments[s];
    const std::string prefix = "seg" + std::to_string(s) + ".";
    tensors.emplace_back(prefix + "meta",
                         Matrix(1, 4,
                                {static_cast<double>(seg.segment_index),
                                 static_cast<double>(seg.prompt_id),
                                 static_cast<double>(seg.frames),
                                 static_cast<double>(seg.tokens_per_frame)}));
    tensors.emplace_back(prefix + "tokens", seg.tokens);
    for (std::size_t t = 0; t < seg.timestep_states.size(); ++t) {
      tensors.emplace_back(prefix + "ts" + std::to_string(t), seg.timestep_states[t]);
    }
  }

  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u64(out, tensors.size());
  for (const auto& [name, tensor] : tensors) write_tensor(out, name, tensor);
  if (!out) throw ConfigError("write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r{std::ifstream(path, std::ios::binary), path};
  if (!r.in) throw ConfigError("cannot open checkpoint " + path);

  char magic[8];
  r.read_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CorruptionError("bad magic in checkpoint " + path);
  }
  const std::uint32_t version = r.read_u32();
  if (version != kVersion) {
    throw MigrationError("checkpoint " + path + " has format version " +
                         std::to_string(version) + ", expected " + std::to_string(kVersion));
  }

  const std::uint64_t count = r.read_u64();
  std::map<std::string, Matrix> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.read_u32();
    if (name_len > 4096) throw CorruptionError("implausible tensor name length in " + path);
    std::string name(name_len, '\0');
    r.read_bytes(name.data(), name_len);
    const std::uint64_t rows = r.read_u64();
    const std::uint64_t cols = r.read_u64();
    if (rows > (1u << 24) || cols > (1u << 24)) {
      throw CorruptionError("implausible tensor shape in " + path);
    }
    Matrix m(rows, cols);
    r.read_bytes(m.data(), m.size() * sizeof(double));
    tensors.emplace(std::move(name), std::move(m));
  }

  auto fetch = [&](const std::string& name) -> const Matrix& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CorruptionError("checkpoint missing tensor '" + name + "'");
    return it->second;
  };

  Checkpoint ck;
  const Matrix& pc = fetch("policy.config");
  ck.policy.config.dim = static_cast<std::size_t>(pc(0, 0));
  ck.policy.config.cross_attention_blocks = static_cast<std::size_t>(pc(0, 1));
  ck.policy.config.linear_layers = static_cast<std::size_t>(pc(0, 2));
  ck.policy.blocks.resize(ck.policy.config.cross_attention_blocks);
  ck.policy.linear_w.resize(ck.policy.config.linear_layers);
  ck.policy.linear_b.resize(ck.policy.config.linear_layers);
  for (const auto& [name, tensor] : ck.policy.named_tensors()) *tensor = fetch(name);

  const std::size_t n_params = ck.policy.tensors().size();
  for (std::size_t i = 0; i < n_params; ++i) {
    ck.optimizer.m.push_back(fetch("opt.m." + std::to_string(i)));
    ck.optimizer.v.push_back(fetch("opt.v." + std::to_string(i)));
  }
  ck.optimizer.step = static_cast<std::size_t>(fetch("opt.step")(0, 0));
  ck.scenes_done = static_cast<std::size_t>(fetch("scenes_done")(0, 0));

  const std::size_t seg_count = static_cast<std::size_t>(fetch("segment_count")(0, 0));
  for (std::size_t s = 0; s < seg_count; ++s) {
    const std::string prefix = "seg" + std::to_string(s) + ".";
    const Matrix& meta = fetch(prefix + "meta");
    SegmentState seg;
    seg.segment_index = static_cast<std::size_t>(meta(0, 0));
    seg.prompt_id = static_cast<std::size_t>(meta(0, 1));
    seg.frames = static_cast<std::size_t>(meta(0, 2));
    seg.tokens_per_frame = static_cast<std::size_t>(meta(0, 3));
    seg.tokens = fetch(prefix + "tokens");
    for (std::size_t t = 0;; ++t) {
      auto it = tensors.find(prefix + "ts" + std::to_string(t));
      if (it == tensors.end()) break;
      seg.timestep_states.push_back(it->second);
    }
    ck.segments.push_back(std::move(seg));
  }
  return ck;
}

GenerationState restore_state(const Checkpoint& ck, const Geometry& geometry,
                              std::size_t timesteps) {
  GenerationState state(geometry, timesteps);
  for (const SegmentState& seg : ck.segments) state.append(seg);
  return state;
}

}  // namespace ctxsel
