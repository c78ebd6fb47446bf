#include <doctest.h>

#include <set>

#include <tidm/modmath.hpp>

#include "oracles.hpp"

using namespace tidm;

TEST_CASE("pow_mod agrees with repeated multiplication") {
  for (u64 m : {11ull, 437ull, 1009ull, 65537ull}) {
    for (u64 b = 1; b < 30; b += 3) {
      for (u64 e = 0; e < 40; e += 7) {
        CHECK(pow_mod(b, e, m) == oracle::slow_pow_mod(b, e, m));
      }
    }
  }
}

TEST_CASE("worked exponentiations from the shared-key example") {
  CHECK(pow_mod(4, 99, 437) == 1);
  CHECK(pow_mod(4, 103, 437) == 256);
  CHECK(pow_mod(32, 317, 437) == 2);
  CHECK(pow_mod(2, 5, 437) == 32);
}

TEST_CASE("inv_mod inverts and rejects non-units") {
  for (u64 m : {11ull, 397ull, 65537ull}) {
    for (u64 a = 1; a < m && a < 200; ++a) {
      u64 inv = inv_mod(a, m);
      CHECK(mul_mod(a, inv, m) == 1);
    }
  }
  CHECK(inv_mod(317, 396) == 5);  // 317 * 5 = 1585 = 4 * 396 + 1
  CHECK_THROWS_AS((void)inv_mod(6, 396), Error);
  CHECK_THROWS_WITH_AS((void)inv_mod(3, 396), doctest::Contains("NotInvertible"), Error);
}

TEST_CASE("floor_div rounds toward negative infinity") {
  CHECK(floor_div(7, 2) == 3);
  CHECK(floor_div(-7, 2) == -4);
  CHECK(floor_div(-32, 5) == -7);
  CHECK(floor_div(static_cast<i128>(4) * 412, 5) == 329);
  CHECK(floor_div(0, 5) == 0);
  CHECK(floor_div(-1, 5) == -1);
}

TEST_CASE("jacobi symbol agrees with the Legendre-product oracle") {
  int count = 0;
  for (u64 n = 3; n < 300; n += 2) {
    for (u64 a = 0; a < 50; ++a) {
      CHECK(jacobi(a, n) == oracle::jacobi_reference(a, n));
      ++count;
    }
  }
  CHECK(count > 1000);
  CHECK(jacobi(4, 437) == 1);
}

TEST_CASE("deterministic primality matches a sieve") {
  auto primes = primes_up_to(2000);
  std::set<u64> prime_set(primes.begin(), primes.end());
  for (u64 n = 0; n < 2000; ++n) {
    CHECK(is_prime_u64(n) == prime_set.contains(n));
  }
  CHECK(is_prime_u64(2305843009213693967ull));  // smallest prime above 2^61
  CHECK_FALSE(is_prime_u64(2305843009213693953ull));
}

TEST_CASE("next_prime_above finds the least strictly greater prime") {
  CHECK(next_prime_above(1) == 2);
  CHECK(next_prime_above(2) == 3);
  CHECK(next_prime_above(13) == 17);
  CHECK(next_prime_above(2622) == 2633);
  CHECK(next_prime_above(u64{1} << 61) == 2305843009213693967ull);
}
