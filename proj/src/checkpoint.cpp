#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ndiff/error.hpp"
#include "ndiff/neurise.hpp"

namespace ndiff {

namespace {

constexpr std::array<char, 8> kTag = {'N', 'D', 'I', 'F', 'F', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 8);
  }
  void u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(b, 4);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t u64() {
    unsigned char b[8];
    read(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint8_t u8() {
    unsigned char b;
    read(&b, 1);
    return b;
  }

 private:
  void read(unsigned char* dst, std::size_t n) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) throw IoError("checkpoint: truncated file");
  }
  std::istream& in_;
};

}  // namespace

void save_checkpoint(std::ostream& out, const ConditionalModel& model, const CheckpointInfo& info) {
  Writer w(out);
  out.write(kTag.data(), kTag.size());
  w.u32(kVersion);
  const NoiseSchedule& s = model.schedule();
  w.i32(s.q());
  w.i32(s.p());
  w.i32(s.steps());
  w.f64(s.epsilon());
  w.u8(model.topology() == Topology::Global ? 0 : 1);

  const TrainConfig& c = info.config;
  w.i32(c.depth);
  w.i32(c.width);
  w.f64(c.learning_rate);
  w.f64(c.weight_decay);
  w.i32(c.batch_size);
  w.i32(c.epochs);
  w.i32(c.min_steps);
  w.u64(c.seed);
  w.u8(c.all_coordinates ? 1 : 0);
  w.u8(c.cosine_decay ? 1 : 0);
  w.u64(info.data_fingerprint);

  w.u32(static_cast<std::uint32_t>(model.networks().size()));
  for (const Mlp& net : model.networks()) {
    const MlpShape& sh = net.shape();
    w.i32(sh.input_dim);
    w.i32(sh.width);
    w.i32(sh.depth);
    w.i32(sh.output_dim);
    w.u64(net.param_count());
    for (double v : net.params()) w.f64(v);
  }
  if (!out) throw IoError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const ConditionalModel& model, const CheckpointInfo& info) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  save_checkpoint(out, model, info);
}

ConditionalModel load_checkpoint(std::istream& in, CheckpointInfo* info) {
  std::array<char, 8> tag{};
  in.read(tag.data(), tag.size());
  if (!in || tag != kTag) throw IoError("checkpoint: bad magic tag");
  Reader r(in);
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const int q = r.i32();
  const int p = r.i32();
  const int steps = r.i32();
  const double eps = r.f64();
  const Topology topology = r.u8() == 0 ? Topology::Global : Topology::PerStep;

  TrainConfig c;
  c.depth = r.i32();
  c.width = r.i32();
  c.learning_rate = r.f64();
  c.weight_decay = r.f64();
  c.batch_size = r.i32();
  c.epochs = r.i32();
  c.min_steps = r.i32();
  c.seed = r.u64();
  c.all_coordinates = r.u8() != 0;
  c.cosine_decay = r.u8() != 0;
  c.topology = topology;
  const std::uint64_t fingerprint = r.u64();

  const std::uint32_t count = r.u32();
  if (count > (1u << 20)) throw IoError("checkpoint: implausible network count");
  std::vector<Mlp> nets;
  nets.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    MlpShape sh;
    sh.input_dim = r.i32();
    sh.width = r.i32();
    sh.depth = r.i32();
    sh.output_dim = r.i32();
    try {
      nets.emplace_back(sh);
    } catch (const std::invalid_argument& e) {
      throw IoError(std::string("checkpoint: ") + e.what());
    }
    const std::uint64_t n = r.u64();
    if (n != nets.back().param_count()) throw IoError("checkpoint: parameter count does not match shape");
    for (double& v : nets.back().params()) v = r.f64();
  }
  if (info != nullptr) *info = CheckpointInfo{c, fingerprint};
  try {
    return ConditionalModel(NoiseSchedule(q, p, steps, eps), topology, std::move(nets));
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

ConditionalModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return load_checkpoint(in, info);
}

}  // namespace ndiff
