#include "cohsim/random.hpp"
#include "cohsim/text_io.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

using namespace cohsim;

TEST_CASE("derive_emitter_rng is reproducible")
{
    auto a = derive_emitter_rng(42, 0);
    auto b = derive_emitter_rng(42, 0);
    for (int i = 0; i < 100; ++i)
        CHECK(a() == b());
}

TEST_CASE("neighbouring emitter streams differ")
{
    auto a = derive_emitter_rng(42, 0);
    auto b = derive_emitter_rng(42, 1);
    int equal = 0;
    for (int i = 0; i < 100; ++i)
        equal += a() == b() ? 1 : 0;
    CHECK(equal == 0);
}

TEST_CASE("first draw matches the golden file")
{
    std::ifstream in(std::string(COHSIM_TEST_DATA_DIR) + "/golden_rng.txt");
    REQUIRE(in);
    std::string line;
    while (std::getline(in, line) && (line.empty() || line[0] == '#')) {
    }
    std::istringstream fields(line);
    std::uint64_t seed = 0, index = 0, first = 0;
    std::string uniform_text;
    fields >> seed >> index >> first >> uniform_text;
    REQUIRE(seed == 42);
    REQUIRE(index == 7);

    auto rng = derive_emitter_rng(seed, index);
    CHECK(rng() == first);
    auto again = derive_emitter_rng(seed, index);
    CHECK(again.uniform() == parse_number(uniform_text));
}

TEST_CASE("uniform and normal draws have the right moments")
{
    RandomStream rng(123);
    constexpr int n = 200'000;
    double su = 0.0, sn = 0.0, sn2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}
