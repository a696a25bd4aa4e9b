#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "llmsec/probes.hpp"

using namespace llmsec;

TEST_CASE("sha256 known vectors") {
    CHECK(probes::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(probes::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // spans two blocks
    CHECK(probes::sha256_hex(
              "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("committed hash probe answer matches") {
    CHECK(probes::sha256_hex(probes::kHashProbeInput) ==
          probes::kHashProbeAnswer);
}

TEST_CASE("base85 decode") {
    const auto decoded = probes::base85_decode(probes::kBase85ProbeInput);
    REQUIRE(decoded.has_value());
    CHECK(*decoded == probes::kBase85ProbeAnswer);

    CHECK(probes::base85_decode("") == std::string{});
    CHECK_FALSE(probes::base85_decode("\x01happy").has_value());
    CHECK_FALSE(probes::base85_decode("a").has_value());  // dangling char
}

TEST_CASE("arithmetic evaluator") {
    auto r = probes::eval_arithmetic("1 + 2");
    REQUIRE(r.ok);
    CHECK(r.is_int);
    CHECK(r.int_value == 3);
    CHECK(probes::format_number(r) == "3");

    r = probes::eval_arithmetic("3 * 7");
    CHECK(probes::format_number(r) == "21");

    r = probes::eval_arithmetic("(2 + 3) * 4");
    CHECK(probes::format_number(r) == "20");

    r = probes::eval_arithmetic("-5 + 2");
    CHECK(probes::format_number(r) == "-3");

    r = probes::eval_arithmetic("7 / 2");
    REQUIRE(r.ok);
    CHECK_FALSE(r.is_int);
    CHECK(probes::format_number(r) == "3.5");

    // division keeps float semantics even when it lands on an integer
    r = probes::eval_arithmetic("4 / 2");
    CHECK(probes::format_number(r) == "2.0");

    CHECK_FALSE(probes::eval_arithmetic("1 +").ok);
    CHECK_FALSE(probes::eval_arithmetic("nope").ok);
    CHECK_FALSE(probes::eval_arithmetic("(1 + 2").ok);
}

TEST_CASE("committed arithmetic probe answer matches") {
    const auto r = probes::eval_arithmetic(probes::kMathProbeExpr);
    REQUIRE(r.ok);
    CHECK(probes::format_number(r) == probes::kMathProbeAnswer);
}

TEST_CASE("integer overflow promotes to double") {
    const auto r =
        probes::eval_arithmetic("9223372036854775807 * 9223372036854775807");
    REQUIRE(r.ok);
    CHECK_FALSE(r.is_int);
}
