#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "segsemi/data.hpp"
#include "segsemi/error.hpp"

namespace segsemi {

namespace {

constexpr char kFeatureMagic[4] = {'S', 'E', 'G', 'F'};
constexpr char kLabelMagic[4] = {'S', 'E', 'G', 'L'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  void expect_magic(const char (&magic)[4], const char* kind) {
    need(4, "magic");
    if (std::memcmp(bytes_.data(), magic, 4) != 0) {
      throw ParseError(source_, "offset", 0, std::string("bad magic, not a ") + kind + " file");
    }
    pos_ = 4;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() < pos_ + n) {
      throw ParseError(source_, "offset", pos_,
                       std::string("truncated while reading ") + what + " (" + std::to_string(bytes_.size() - pos_) +
                           " of " + std::to_string(n) + " bytes left)");
    }
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw ParseError(source_, "offset", pos_, std::to_string(bytes_.size() - pos_) + " trailing bytes");
    }
  }

  std::size_t pos() const { return pos_; }
  const std::string& source() const { return source_; }

 private:
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "offset", 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace

std::string encode_features(const FeatureSequence& f) {
  std::string out(kFeatureMagic, 4);
  put_u32(out, kFeatureFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(f.frames()));
  put_u32(out, static_cast<std::uint32_t>(f.dim()));
  out.reserve(out.size() + 4 * f.data.size());
  for (float v : f.data.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureSequence decode_features(const std::string& bytes, const std::string& source) {
  Reader r(bytes, source);
  r.expect_magic(kFeatureMagic, "SEGF feature");
  const std::size_t version_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureFormatVersion) {
    throw ParseError(source, "offset", version_at, "unsupported SEGF version " + std::to_string(version));
  }
  const std::uint32_t t = r.u32("frame count");
  const std::uint32_t d = r.u32("feature dim");
  if (t == 0 || d == 0) throw ParseError(source, "offset", 8, "frame count and dim must be positive");
  r.need(std::size_t{4} * t * d, "feature values");
  FeatureSequence f{Tensor<float>::matrix(t, d)};
  for (auto& v : f.data.values()) v = std::bit_cast<float>(r.u32("feature value"));
  r.expect_end();
  return f;
}

std::string encode_labels(const FrameLabels& labels) {
  std::string out(kLabelMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  for (Label l : labels) put_u32(out, l);
  return out;
}

FrameLabels decode_labels(const std::string& bytes, const std::string& source) {
  Reader r(bytes, source);
  r.expect_magic(kLabelMagic, "SEGL label");
  const std::uint32_t t = r.u32("frame count");
  r.need(std::size_t{4} * t, "labels");
  FrameLabels out(t);
  for (auto& l : out) l = r.u32("label");
  r.expect_end();
  return out;
}

void write_features(const std::filesystem::path& path, const FeatureSequence& f) { spill(path, encode_features(f)); }
FeatureSequence read_features(const std::filesystem::path& path) { return decode_features(slurp(path), path.string()); }
void write_labels(const std::filesystem::path& path, const FrameLabels& labels) { spill(path, encode_labels(labels)); }
FrameLabels read_labels(const std::filesystem::path& path) { return decode_labels(slurp(path), path.string()); }

}  // namespace segsemi
