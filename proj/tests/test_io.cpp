#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "ofr/flow_io.hpp"
#include "ofr/image_io.hpp"
#include "ofr/key_value.hpp"
#include "ofr/params.hpp"
#include "test_util.hpp"

using namespace ofr;
using ofr::test::max_abs_diff;
using ofr::test::random_conv;
using ofr::test::random_frame;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ofr_io_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("quantization") {
  CHECK(io::quantize(0.0) == 0);
  CHECK(io::quantize(1.0) == 255);
  CHECK(io::quantize(-0.3) == 0);
  CHECK(io::quantize(1.7) == 255);
  CHECK(io::quantize(127.4 / 255.0) == 127);
  CHECK(io::quantize(127.6 / 255.0) == 128);
  for (int v = 0; v < 256; ++v) CHECK(io::quantize(io::dequantize(static_cast<std::uint8_t>(v))) == v);
}

TEST_CASE("png and ppm round trips") {
  const Frame f = io::quantized(random_frame(9, 13, 3, 1));
  for (const char* name : {"rt.png", "rt.ppm"}) {
    const fs::path p = scratch(name);
    io::write_image(p, f);
    const Frame back = io::read_image(p);
    CHECK(back.same_shape(f));
    CHECK(max_abs_diff(back, f) == 0.0);
  }
  const Frame gray = io::quantized(random_frame(5, 4, 1, 2));
  io::write_image(scratch("gray.png"), gray);
  const Frame rgb = io::read_image(scratch("gray.png"));
  REQUIRE(rgb.channels() == 3);
  CHECK(rgb(3, 2, 2) == gray(3, 2, 0));

  CHECK(read_bytes(scratch("rt.ppm")).rfind("P6", 0) == 0);
  CHECK_THROWS_AS(io::write_image(scratch("x.bmp"), f), FormatError);
  CHECK_THROWS_AS(io::write_image(scratch("x.png"), Frame(2, 2, 2)), ConfigError);
  write_bytes(scratch("bad.png"), "not a png at all");
  CHECK_THROWS_AS(io::read_image(scratch("bad.png")), FormatError);
  write_bytes(scratch("bad.ppm"), "P6\n4 4\n255\nabc");
  CHECK_THROWS_AS(io::read_image(scratch("bad.ppm")), FormatError);
  CHECK_THROWS_AS(io::read_image(scratch("missing.png")), IoError);
}

TEST_CASE("frame listing orders numerically") {
  const fs::path dir = scratch("listing");
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const char* n : {"10.png", "2.png", "000001_5.png", "000001.ppm", "notes.txt"}) write_bytes(dir / n, "");
  const auto files = io::list_frames(dir);
  REQUIRE(files.size() == 4);
  CHECK(files[0].filename() == "000001.ppm");
  CHECK(files[1].filename() == "000001_5.png");
  CHECK(files[2].filename() == "2.png");
  CHECK(files[3].filename() == "10.png");
  CHECK_THROWS_AS(io::list_frames(dir / "nope"), IoError);
}

TEST_CASE("flow files") {
  const Flow f(random_frame(7, 5, 2, 3, -4, 4), 0.5, 1);
  io::write_flow(scratch("a.flo"), f);
  const std::string bytes = read_bytes(scratch("a.flo"));
  CHECK(bytes.size() == 4 + 8 + 7 * 5 * 2 * 4);
  CHECK(bytes.substr(0, 4) == "OFRB");
  std::uint32_t w = 0, h = 0;
  std::memcpy(&w, bytes.data() + 4, 4);
  std::memcpy(&h, bytes.data() + 8, 4);
  CHECK(w == 5);
  CHECK(h == 7);
  float u01 = 0;
  std::memcpy(&u01, bytes.data() + 12 + 8, 4);  // (y=0, x=1).u
  CHECK(u01 == static_cast<float>(f.u(0, 1)));

  const Flow back = io::read_flow(scratch("a.flo"));
  CHECK(back.height() == 7);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 5; ++x) CHECK(back.v(y, x) == static_cast<double>(static_cast<float>(f.v(y, x))));
  io::write_flow(scratch("b.flo"), back);
  CHECK(read_bytes(scratch("b.flo")) == bytes);

  write_bytes(scratch("empty.flo"), "");
  CHECK_THROWS_WITH_AS(io::read_flow(scratch("empty.flo")), doctest::Contains("OFRB"), FormatError);
  write_bytes(scratch("magic.flo"), "PIEH" + bytes.substr(4));
  CHECK_THROWS_WITH_AS(io::read_flow(scratch("magic.flo")), doctest::Contains("OFRB"), FormatError);
  write_bytes(scratch("short.flo"), bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(io::read_flow(scratch("short.flo")), FormatError);
}

TEST_CASE("weight files") {
  ParamSet params;
  params.add("a", random_conv(3, 2, 4, 1, 1, 4));
  params.add("b.mix", random_conv(1, 8, 4, 0, 1, 5));
  write_weights(scratch("w.bin"), params);
  const std::string bytes = read_bytes(scratch("w.bin"));
  CHECK(bytes.substr(0, 4) == "OFRW");

  ParamSet loaded = params.zeros_like();
  read_weights(scratch("w.bin"), loaded);
  const auto x = params.arrays();
  const auto y = loaded.arrays();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (Eigen::Index k = 0; k < x[i].values.size(); ++k)
      CHECK(y[i].values[k] == static_cast<double>(static_cast<float>(x[i].values[k])));
  write_weights(scratch("w2.bin"), loaded);
  CHECK(read_bytes(scratch("w2.bin")) == bytes);

  ParamSet other;
  other.add("a", random_conv(3, 2, 4, 1, 1, 4));
  CHECK_THROWS_AS(read_weights(scratch("w.bin"), other), ConfigError);
  ParamSet wider;
  wider.add("a", random_conv(3, 2, 5, 1, 1, 4));
  wider.add("b.mix", random_conv(1, 8, 4, 0, 1, 5));
  CHECK_THROWS_AS(read_weights(scratch("w.bin"), wider), ConfigError);
  write_bytes(scratch("bad.bin"), "OFRX");
  CHECK_THROWS_AS(read_weights(scratch("bad.bin"), loaded), FormatError);
  write_bytes(scratch("trunc.bin"), bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS_AS(read_weights(scratch("trunc.bin"), loaded), FormatError);
}

TEST_CASE("key-value text") {
  const auto kv = parse_key_values("# comment\n a = 1 \n\nname=two words # trailing\n", "test");
  CHECK(kv.size() == 2);
  CHECK(kv.at("a") == "1");
  CHECK(kv.at("name") == "two words");
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n", "test"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("just text\n", "test"), ConfigError);
  CHECK_THROWS_AS(reject_unknown_keys(kv, {"a"}, "test"), ConfigError);
  CHECK(parse_double("0.25", "k") == 0.25);
  CHECK(parse_int("-3", "k") == -3);
  CHECK(parse_bool("true", "k"));
  CHECK_THROWS_AS(parse_int("3.5", "k"), ConfigError);
  CHECK_THROWS_AS(parse_double("x", "k"), ConfigError);

  write_key_values(scratch("kv.txt"), {{"b", "2"}, {"c", "x y"}});
  const auto back = read_key_values(scratch("kv.txt"));
  CHECK(back.at("c") == "x y");
}
