#ifndef RCM_ENV_IO_HPP
#define RCM_ENV_IO_HPP

// Binary environment file:
//   magic "RCME" | version u32 = 1 | d u8 | n u64 | d*n^d conductances f64
// All integers and floats little-endian. Conductances in vertex order
// (lexicographic, last coordinate fastest), the d forward edges +e_1..+e_d
// per vertex.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/graph.hpp"
#include "rcm/io.hpp"

namespace rcm {

inline constexpr char kEnvMagic[4] = {'R', 'C', 'M', 'E'};
inline constexpr std::uint32_t kEnvVersion = 1;

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
}

inline std::uint64_t get_le(const std::string& in, std::size_t& pos, std::size_t width) {
  if (pos + width > in.size()) throw FormatError("environment file truncated");
  std::uint64_t bits = 0;
  for (std::size_t k = 0; k < width; ++k) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
  }
  pos += width;
  return bits;
}

}  // namespace detail

inline std::string encode_env(const Environment& env) {
  const TorusLattice& lat = env.lattice();
  std::string out(kEnvMagic, 4);
  detail::put_le<std::uint32_t>(out, kEnvVersion);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(lat.dim()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(lat.side()));
  out.reserve(out.size() + 8 * lat.num_edges());
  for (double w : env.conductance().values()) detail::put_le<double>(out, w);
  return out;
}

inline Environment decode_env(const std::string& in) {
  if (in.size() < 4 || std::memcmp(in.data(), kEnvMagic, 4) != 0) {
    throw FormatError("not an environment file (bad magic bytes)");
  }
  std::size_t pos = 4;
  const auto version = detail::get_le(in, pos, 4);
  if (version != kEnvVersion) {
    throw FormatError("unsupported environment file version " + std::to_string(version));
  }
  const auto d = static_cast<int>(detail::get_le(in, pos, 1));
  const auto n = static_cast<std::int64_t>(detail::get_le(in, pos, 8));
  if (d < 2 || d > TorusLattice::kMaxDim || n < 3 || n > (1 << 20)) {
    throw FormatError("malformed environment header (d=" + std::to_string(d) + ", n=" + std::to_string(n) + ")");
  }
  const TorusLattice lat(d, n);
  if (in.size() - pos != 8 * lat.num_edges()) {
    throw FormatError(in.size() - pos < 8 * lat.num_edges() ? "environment file truncated"
                                                             : "trailing bytes after environment payload");
  }
  std::vector<double> w(lat.num_edges());
  for (std::size_t e = 0; e < w.size(); ++e) {
    w[e] = std::bit_cast<double>(detail::get_le(in, pos, 8));
    if (!(w[e] > 0.0) || !std::isfinite(w[e])) {
      throw FormatError("nonpositive or non-finite conductance at edge " + std::to_string(e));
    }
  }
  return Environment(EdgeField(lat, std::move(w)));
}

inline void save_env(const Environment& env, const std::filesystem::path& path) {
  write_file_atomic(path, encode_env(env));
}

inline Environment load_env(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open environment file " + path.string());
  std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_env(data);
}

}  // namespace rcm

#endif  // RCM_ENV_IO_HPP
