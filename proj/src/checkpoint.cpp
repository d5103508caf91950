#include "hiret/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "hiret/errors.hpp"

namespace hiret {

namespace {

constexpr char kMagic[4] = {'H', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void doubles(std::span<const double> xs) {
    u64(xs.size());
    raw(xs.data(), xs.size() * sizeof(double));
  }

 private:
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  std::uint8_t u8() { return pod<std::uint8_t>(); }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::string str() {
    std::string s(u32(), '\0');
    raw(s.data(), s.size());
    return s;
  }
  std::vector<double> doubles() {
    const std::uint64_t n = u64();
    if (n > (std::uint64_t{1} << 32)) fail("implausible tensor size");
    std::vector<double> xs(n);
    raw(xs.data(), n * sizeof(double));
    return xs;
  }
  [[noreturn]] void fail(const std::string& why) const { throw CheckpointError(path_ + ": " + why); }

 private:
  template <typename T>
  T pod() {
    T v{};
    raw(&v, sizeof v);
    return v;
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) fail("truncated checkpoint");
  }
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kVlr: return "vlr";
    case Stage::kLlr: return "llr";
    case Stage::kDecoder: return "decoder";
  }
  return "unknown";
}

AdamSnapshot snapshot(const Adam& adam) { return {adam.steps(), adam.moments()}; }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.str(stage_name(checkpoint.stage));
  w.str(checkpoint.fingerprint);
  w.u64(checkpoint.params.size());
  for (const auto& [name, t] : checkpoint.params) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    w.u8(t.requires_grad() ? 1 : 0);
    w.doubles(t.values());
  }
  w.u8(checkpoint.adam ? 1 : 0);
  if (checkpoint.adam) {
    w.u64(checkpoint.adam->steps);
    w.u64(checkpoint.adam->moments.size());
    for (const auto& [name, m] : checkpoint.adam->moments) {
      w.str(name);
      w.doubles(m.m);
      w.doubles(m.v);
    }
  }
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, Stage expected, const std::string& fingerprint,
                           const std::string& missing_hint) {
  if (!std::filesystem::exists(path)) {
    std::string msg = stage_name(expected) + " checkpoint not found at " + path.string();
    if (!missing_hint.empty()) msg += "; " + missing_hint;
    throw MissingArtifactError(msg);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  Reader r(in, path.string());
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("not a checkpoint file");
  if (const auto version = r.u32(); version != kVersion) r.fail("unsupported format version " + std::to_string(version));

  Checkpoint c;
  const std::string stage = r.str();
  if (stage != stage_name(expected)) r.fail("holds stage '" + stage + "', expected '" + stage_name(expected) + "'");
  c.stage = expected;
  c.fingerprint = r.str();
  if (!fingerprint.empty() && c.fingerprint != fingerprint) {
    r.fail("config fingerprint " + c.fingerprint + " does not match the current config (" + fingerprint +
           "); rerun the stage with this config");
  }
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    const bool trainable = r.u8() != 0;
    auto values = r.doubles();
    if (values.size() != shape_numel(shape)) r.fail("tensor " + name + " has a bad size");
    c.params.add(name, Tensor(std::move(shape), std::move(values)), trainable);
  }
  if (r.u8() != 0) {
    AdamSnapshot snap;
    snap.steps = r.u64();
    const std::uint64_t n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string name = r.str();
      Moments m;
      m.m = r.doubles();
      m.v = r.doubles();
      snap.moments.emplace(std::move(name), std::move(m));
    }
    c.adam = std::move(snap);
  }
  return c;
}

}  // namespace hiret
