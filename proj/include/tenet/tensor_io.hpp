#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tenet/tensor.hpp"

namespace tenet {

// TNSR layout: "TNSR", u32 version (= 1), u32 order, u32 dim, then d^r
// little-endian IEEE-754 doubles in row-major order.
void write_tensor(std::ostream& out, const DenseTensor& t);
DenseTensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor load_tensor(const std::filesystem::path& path);

/// Ordered collection of named rectangular matrices.
///
/// Stored as "TNSB", u32 version (= 1), u32 section count, then per section:
/// u32 name length, name bytes, u32 rows, u32 cols, rows*cols little-endian
/// doubles in row-major order. Names are unique.
class MatrixBundle {
 public:
  void put(std::string name, RowMatrix m);
  const RowMatrix& get(const std::string& name) const;
  std::optional<std::reference_wrapper<const RowMatrix>> find(const std::string& name) const;

  const std::vector<std::pair<std::string, RowMatrix>>& sections() const { return sections_; }

  friend bool operator==(const MatrixBundle& a, const MatrixBundle& b);

 private:
  std::vector<std::pair<std::string, RowMatrix>> sections_;
};

void write_bundle(std::ostream& out, const MatrixBundle& bundle);
MatrixBundle read_bundle(std::istream& in);

void save_bundle(const std::filesystem::path& path, const MatrixBundle& bundle);
MatrixBundle load_bundle(const std::filesystem::path& path);

}  // namespace tenet
