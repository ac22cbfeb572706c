#include "mpf/core/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mpf {

namespace {

constexpr char kMagic[4] = {'M', 'E', 'F', '1'};
constexpr size_t kAxisNameBytes = 16;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

static_assert(std::endian::native == std::endian::little,
              "MEF payload I/O assumes a little-endian host");

}  // namespace

void write_tensor(const TensorF& t, const std::filesystem::path& path) {
  check(t.size() == TensorF::element_count(t.dims()),
        "write_tensor: payload/dims mismatch");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), "write_tensor: cannot open " + path.string());
  os.write(kMagic, 4);
  put_u32(os, static_cast<uint32_t>(t.rank()));
  for (size_t i = 0; i < t.rank(); ++i) {
    put_u32(os, t.dim(i));
    char name[kAxisNameBytes] = {};
    if (!t.axes().empty()) {
      const std::string& a = t.axes()[i];
      check(a.size() < kAxisNameBytes, "write_tensor: axis name too long: " + a);
      std::memcpy(name, a.data(), a.size());
    }
    os.write(name, kAxisNameBytes);
  }
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(float)));
  check(os.good(), "write_tensor: short write to " + path.string());
}

TensorF read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "read_tensor: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  check(is.good() && std::memcmp(magic, kMagic, 4) == 0,
        "read_tensor: bad magic in " + path.string());
  uint32_t rank = get_u32(is);
  check(is.good() && rank <= 16, "read_tensor: corrupt rank in " + path.string());
  std::vector<uint32_t> dims(rank);
  std::vector<std::string> axes(rank);
  for (uint32_t i = 0; i < rank; ++i) {
    dims[i] = get_u32(is);
    char name[kAxisNameBytes + 1] = {};
    is.read(name, kAxisNameBytes);
    axes[i] = name;
  }
  check(is.good(), "read_tensor: truncated header in " + path.string());
  size_t n = TensorF::element_count(dims);
  std::vector<float> payload(n);
  is.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  check(is.good(), "read_tensor: truncated payload in " + path.string());
  return TensorF::of(std::move(dims), std::move(payload), std::move(axes));
}

}  // namespace mpf
