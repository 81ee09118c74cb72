#include "cbound/cachesim.hpp"
#include "cbound/errors.hpp"
#include "cbound/trace.hpp"

#include <doctest.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cbound;

TEST_CASE("lackey record lines") {
    SUBCASE("load with leading space") {
        auto t = parse_lackey(std::string_view(" L 04f2b0a0,8"));
        REQUIRE(t.events.size() == 1);
        CHECK(t.events[0].kind == AccessKind::Load);
        CHECK(t.events[0].address == 0x04f2b0a0);
        CHECK(t.events[0].size == 8);
    }
    SUBCASE("instruction fetch") {
        auto t = parse_lackey(std::string_view("I  0400d7d4,8"));
        REQUIRE(t.events.size() == 1);
        CHECK(t.events[0].kind == AccessKind::InstrFetch);
        CHECK(t.events[0].address == 0x0400d7d4);
        CHECK(t.events[0].size == 8);
    }
    SUBCASE("modify is one event") {
        auto t = parse_lackey(std::string_view(" M ffefffb58,4"));
        REQUIRE(t.events.size() == 1);
        CHECK(t.events[0].kind == AccessKind::Modify);
        CHECK(t.events[0].address == 0xffefffb58ULL);
        CHECK(t.events[0].size == 4);
    }
    SUBCASE("store") {
        auto t = parse_lackey(std::string_view(" S 7ff000ab8,16"));
        REQUIRE(t.events.size() == 1);
        CHECK(t.events[0].kind == AccessKind::Store);
        CHECK(t.events[0].size == 16);
    }
}

TEST_CASE("lackey noise is skipped and counted") {
    const std::string text =
        "==12345== Lackey, an example Valgrind tool\n"
        "==12345== Command: ./a.out\n"
        "\n"
        "I  04000800,3\n"
        " S 7ff000ab8,8\r\n"
        "Invalid line\n";
    auto t = parse_lackey(std::string_view(text));
    CHECK(t.events.size() == 2);
    CHECK(t.unrecognized_lines == 4);
    CHECK(t.instruction_count() == 1);
    CHECK(t.data_access_count() == 1);
}

TEST_CASE("lackey malformed records report the line") {
    const std::string text = "I  04000800,3\n L zz12,8\n";
    try {
        parse_lackey(std::string_view(text));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_lackey(std::string_view(" L 1000,0")), ParseError);
    CHECK_THROWS_AS(parse_lackey(std::string_view(" L 1000,abc")), ParseError);
    CHECK_THROWS_AS(parse_lackey(std::string_view(" L 1000")), ParseError);
    CHECK_THROWS_AS(parse_lackey(std::string_view(" S ,8")), ParseError);
}

TEST_CASE("empty input is an empty trace") {
    auto t = parse_lackey(std::string_view(""));
    CHECK(t.events.empty());
    CHECK(t.unrecognized_lines == 0);
}

TEST_CASE("serialize then parse is identity on generated events") {
    SyntheticSpec spec{RandomWalk{1u << 16, 500}, 2, 64, 8};
    auto t = generate_synthetic(spec, 3);
    // mix kinds so every prefix is exercised
    for (std::size_t i = 0; i < t.events.size(); i += 7)
        if (t.events[i].is_data()) t.events[i].kind = (i % 2) ? AccessKind::Store : AccessKind::Modify;
    std::ostringstream out;
    write_lackey(out, t);
    std::istringstream in(out.str());
    auto back = parse_lackey(in);
    CHECK(back.events == t.events);

    // canonical lines reproduce byte for byte
    for (std::string line : {"I  0400d7d4,8", " L 04f2b0a0,8", " M ffefffb58,4", " S 00000010,1"}) {
        auto p = parse_lackey(std::string_view(line));
        CHECK(to_lackey_line(p.events.at(0)) == line);
    }
}

TEST_CASE("gzip traces are detected by magic bytes") {
    const auto dir = std::filesystem::temp_directory_path() / "cbound_trace_test";
    std::filesystem::create_directories(dir);
    const std::string text = "==1== banner\nI  04000800,3\n L 00001000,8\n M 00001040,4";
    {
        std::ofstream(dir / "plain.txt") << text;
        gzFile f = gzopen((dir / "packed.gz").c_str(), "wb");
        REQUIRE(f != nullptr);
        gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
        gzclose(f);
    }
    auto plain = load_lackey_file(dir / "plain.txt");
    auto packed = load_lackey_file(dir / "packed.gz");
    CHECK(plain.events.size() == 3);
    CHECK(plain.events == packed.events);
    CHECK(packed.unrecognized_lines == 1);
    CHECK_THROWS_AS(load_lackey_file(dir / "missing.txt"), InputError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("constant loop layout is seed independent") {
    SyntheticSpec spec{ConstantLoop{4, 3}};
    auto a = generate_synthetic(spec, 0);
    auto b = generate_synthetic(spec, 12345);
    CHECK(a.events == b.events);
    std::vector<std::uint64_t> data;
    for (const auto& e : a.events)
        if (e.is_data()) data.push_back(e.address);
    CHECK(data == std::vector<std::uint64_t>{0, 64, 128, 192, 0, 64, 128, 192, 0, 64, 128, 192});
    CHECK(a.instruction_count() == 4 * data.size());
}

TEST_CASE("constant loop re-references sit at distance W") {
    for (std::uint64_t w : {1u, 3u, 17u}) {
        auto t = generate_synthetic(SyntheticSpec{ConstantLoop{w, 5}}, 0);
        auto s = stack_distances(t);
        for (std::size_t i = 0; i < s.distances.size(); ++i) {
            if (i < w) CHECK(s.distances[i] == kInfiniteDistance);
            else CHECK(s.distances[i] == w);
        }
    }
}

TEST_CASE("random walk determinism") {
    SyntheticSpec spec{RandomWalk{1000000, 100000}};
    auto a = generate_synthetic(spec, 7);
    auto b = generate_synthetic(spec, 7);
    auto c = generate_synthetic(spec, 8);
    CHECK(a.events == b.events);
    CHECK(a.events != c.events);
    CHECK(a.data_access_count() == 100000);
}

TEST_CASE("periodic phases alternate low and high miss rate") {
    SyntheticSpec spec{PeriodicPhases{{4, 4096}, 10000, 5}};
    auto t = generate_synthetic(spec, 1);
    CHECK(t.data_access_count() == 2 * 10000 * 5);
    // one phase = 10^4 accesses = 4*10^4 instructions = 4 windows of 10^4
    const std::uint64_t caps[] = {64};
    auto series = miss_rate_series(t, caps, 64, 10000).at(0);
    REQUIRE(series.rates.size() == 40);
    for (std::size_t w = 0; w < series.rates.size(); ++w) {
        const bool high = (w / 4) % 2 == 1;
        if (high) CHECK(series.rates[w] == doctest::Approx(1.0));
        else CHECK(series.rates[w] < 0.01);
    }
}

TEST_CASE("invalid synthetic parameters") {
    CHECK_THROWS_AS(generate_synthetic(SyntheticSpec{ConstantLoop{0, 3}}, 0), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(SyntheticSpec{ConstantLoop{4, 0}}, 0), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(SyntheticSpec{PeriodicPhases{{}, 10, 1}}, 0), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(SyntheticSpec{PeriodicPhases{{4, 0}, 10, 1}}, 0), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(SyntheticSpec{RandomWalk{0, 10}}, 0), ConfigError);
    SyntheticSpec bad_line{ConstantLoop{4, 1}};
    bad_line.line_bytes = 48;
    CHECK_THROWS_AS(generate_synthetic(bad_line, 0), ConfigError);
}

TEST_CASE("cold-miss noise is seeded and off by default") {
    SyntheticSpec spec{ConstantLoop{8, 50}};
    CHECK(generate_synthetic(spec, 1).events == generate_synthetic(spec, 2).events);
    spec.noise = 0.1;
    const auto a = generate_synthetic(spec, 1);
    CHECK(a.events == generate_synthetic(spec, 1).events);
    CHECK(a.events != generate_synthetic(spec, 2).events);
    const auto extra = a.data_access_count() - 400;
    CHECK(extra > 20);
    CHECK(extra < 70);
    // Every noise access is a first touch.
    const auto d = stack_distances(a);
    std::size_t cold = 0;
    for (auto v : d.distances) cold += v == kInfiniteDistance;
    CHECK(cold == 8 + extra);
    spec.noise = 1.0;
    CHECK_THROWS_AS(generate_synthetic(spec, 0), ConfigError);
    spec.noise = -0.1;
    CHECK_THROWS_AS(generate_synthetic(spec, 0), ConfigError);
}
