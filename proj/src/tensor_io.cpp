#include "tenet/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "tenet/errors.hpp"

namespace tenet {
namespace {

constexpr char kTensorMagic[4] = {'T', 'N', 'S', 'R'};
constexpr char kBundleMagic[4] = {'T', 'N', 'S', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxNameLength = 4096;

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) {
    v = to_little_endian(v);
    bytes(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void f64(double v) {
    auto bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
    bytes(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  void finish() {
    if (!out_) throw std::runtime_error("failed to write tensor stream");
  }

 private:
  std::ostream& out_;
};

// Tracks the byte offset so decode failures can name where they happened.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::size_t offset() const { return offset_; }

  void bytes(char* p, std::size_t n, const char* what) {
    in_.read(p, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
      throw ParseError(std::string("truncated ") + what, offset_ + got);
    }
    offset_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    bytes(reinterpret_cast<char*>(&v), sizeof v, what);
    return to_little_endian(v);
  }
  double f64(const char* what) {
    std::uint64_t bits = 0;
    const std::size_t at = offset_;
    bytes(reinterpret_cast<char*>(&bits), sizeof bits, what);
    const double v = std::bit_cast<double>(to_little_endian(bits));
    if (!std::isfinite(v)) throw ParseError("non-finite coefficient", at);
    return v;
  }
  void magic(const char (&expected)[4]) {
    char got[4];
    bytes(got, 4, "magic");
    if (std::memcmp(got, expected, 4) != 0) {
      throw ParseError("bad magic, expected \"" + std::string(expected, 4) + "\"", 0);
    }
  }
  void version() {
    const std::size_t at = offset_;
    const auto v = u32("version");
    if (v != kVersion) throw ParseError("unsupported version " + std::to_string(v), at);
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw ParseError("trailing bytes after payload", offset_);
    }
  }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  return out;
}

}  // namespace

void write_tensor(std::ostream& out, const DenseTensor& t) {
  Writer w(out);
  w.bytes(kTensorMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(t.order()));
  w.u32(static_cast<std::uint32_t>(t.dim()));
  for (double v : t.data()) w.f64(v);
  w.finish();
}

DenseTensor read_tensor(std::istream& in) {
  Reader r(in);
  r.magic(kTensorMagic);
  r.version();
  std::size_t at = r.offset();
  const auto order = r.u32("order");
  if (order == 0 || order > kMaxOrder) {
    throw ParseError("order " + std::to_string(order) + " out of range 1..4", at);
  }
  at = r.offset();
  const auto dim = r.u32("dim");
  if (dim == 0) throw ParseError("dimension must be positive", at);
  std::size_t count = 0;
  try {
    count = ipow(dim, order);
  } catch (const CapacityError&) {
    throw ParseError("tensor shape too large", at);
  }
  std::vector<double> data(count);
  for (double& v : data) v = r.f64("coefficients");
  r.expect_end();
  return {order, dim, std::move(data)};
}

void save_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  auto out = open_out(path);
  write_tensor(out, t);
}

DenseTensor load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor(in);
}

void MatrixBundle::put(std::string name, RowMatrix m) {
  for (auto& [n, mat] : sections_) {
    if (n == name) {
      mat = std::move(m);
      return;
    }
  }
  sections_.emplace_back(std::move(name), std::move(m));
}

std::optional<std::reference_wrapper<const RowMatrix>> MatrixBundle::find(
    const std::string& name) const {
  for (const auto& [n, mat] : sections_) {
    if (n == name) return std::cref(mat);
  }
  return std::nullopt;
}

const RowMatrix& MatrixBundle::get(const std::string& name) const {
  auto found = find(name);
  if (!found) throw std::invalid_argument("bundle has no section named '" + name + "'");
  return found->get();
}

bool operator==(const MatrixBundle& a, const MatrixBundle& b) {
  if (a.sections_.size() != b.sections_.size()) return false;
  for (std::size_t i = 0; i < a.sections_.size(); ++i) {
    const auto& [na, ma] = a.sections_[i];
    const auto& [nb, mb] = b.sections_[i];
    if (na != nb || ma.rows() != mb.rows() || ma.cols() != mb.cols() || ma != mb) return false;
  }
  return true;
}

void write_bundle(std::ostream& out, const MatrixBundle& bundle) {
  Writer w(out);
  w.bytes(kBundleMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(bundle.sections().size()));
  for (const auto& [name, m] : bundle.sections()) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
  }
  w.finish();
}

MatrixBundle read_bundle(std::istream& in) {
  Reader r(in);
  r.magic(kBundleMagic);
  r.version();
  const auto count = r.u32("section count");
  MatrixBundle bundle;
  for (std::uint32_t s = 0; s < count; ++s) {
    std::size_t at = r.offset();
    const auto len = r.u32("name length");
    if (len == 0 || len > kMaxNameLength) throw ParseError("bad section name length", at);
    std::string name(len, '\0');
    r.bytes(name.data(), len, "section name");
    if (bundle.find(name)) throw ParseError("duplicate section '" + name + "'", at);
    at = r.offset();
    const auto rows = r.u32("rows");
    const auto cols = r.u32("cols");
    if (rows == 0 || cols == 0 ||
        static_cast<std::uint64_t>(rows) * cols > (std::uint64_t{1} << 24)) {
      throw ParseError("bad matrix shape", at);
    }
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64("matrix data");
    bundle.put(std::move(name), std::move(m));
  }
  r.expect_end();
  return bundle;
}

void save_bundle(const std::filesystem::path& path, const MatrixBundle& bundle) {
  auto out = open_out(path);
  write_bundle(out, bundle);
}

MatrixBundle load_bundle(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_bundle(in);
}

}  // namespace tenet
