#include "gadm/random.hpp"

namespace gadm {
namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept
{
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xD6E8FEB86659FD93ULL));
}

double RandomStream::uniform() noexcept
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::std_normal()
{
  return normal_(engine_);
}

std::size_t RandomStream::index(std::size_t n) noexcept
{
  // Lemire's multiply-shift; bias is negligible for the small n used here.
  __extension__ using u128 = unsigned __int128;
  const u128 wide = static_cast<u128>(engine_()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

double RandomStream::beta(double a, double b)
{
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(engine_);
  const double y = gb(engine_);
  return x / (x + y);
}

}  // namespace gadm
