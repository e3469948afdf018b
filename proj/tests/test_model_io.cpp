#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fatmon/model_io.hpp"

#include "test_support.hpp"

using namespace fatmon;
using testsupport::TempDir;
using testsupport::make_test_model;
using testsupport::read_file;
using testsupport::write_file;

namespace {

ModelFile make_model_file() {
    ModelFile file;
    file.model = make_test_model();
    file.model.trend.features[2].slope = 0.1234567890123456789;  // exercise full precision
    file.provenance.created_utc = utc_timestamp(0);
    file.provenance.seed = 42;
    file.provenance.inputs.push_back({"runs/knee1.csv", std::string(64, 'a')});
    file.provenance.inputs.push_back({"runs/ankle1.csv", std::string(64, 'b')});
    return file;
}

}  // namespace

TEST_CASE("model save, load, save is byte-identical", "[model]") {
    const ModelFile file = make_model_file();
    std::ostringstream first;
    save_model(first, file);
    std::istringstream in(first.str());
    const ModelFile reloaded = load_model(in);
    std::ostringstream second;
    save_model(second, reloaded);
    CHECK(first.str() == second.str());
}

TEST_CASE("persisted reals survive the round trip exactly", "[model]") {
    const ModelFile file = make_model_file();
    std::ostringstream out;
    save_model(out, file);
    std::istringstream in(out.str());
    const ModelFile reloaded = load_model(in);
    CHECK(reloaded.model.trend.features[2].slope == file.model.trend.features[2].slope);
    for (std::size_t i = 0; i < file.model.relevance.p_selected.size(); ++i)
        CHECK(reloaded.model.relevance.p_selected[i] == file.model.relevance.p_selected[i]);
    CHECK(reloaded.model.filter_params[0].gain == file.model.filter_params[0].gain);
    CHECK(reloaded.provenance.seed == file.provenance.seed);
    CHECK(reloaded.provenance.inputs.size() == 2);
}

TEST_CASE("fixed epoch timestamps are reproducible", "[model]") {
    CHECK(utc_timestamp(0) == "1970-01-01T00:00:00Z");
    CHECK(utc_timestamp(1234567890) == "2009-02-13T23:31:30Z");
}

TEST_CASE("loading rejects corrupt or mismatched documents", "[model]") {
    SECTION("not JSON at all") {
        std::istringstream in("definitely not json");
        CHECK_THROWS_AS(load_model(in), Error);
    }
    SECTION("unsupported schema version") {
        const ModelFile file = make_model_file();
        std::ostringstream out;
        save_model(out, file);
        std::string text = out.str();
        const std::string needle = "\"schema_version\": 1";
        text.replace(text.find(needle), needle.size(), "\"schema_version\": 99");
        std::istringstream in(text);
        try {
            load_model(in);
            FAIL("expected a version error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Validation);
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }
    SECTION("missing section") {
        std::istringstream in("{\"schema_version\": 1}");
        CHECK_THROWS_AS(load_model(in), Error);
    }
    SECTION("broken permutation") {
        const ModelFile file = make_model_file();
        std::ostringstream out;
        save_model(out, file);
        std::string text = out.str();
        const std::string needle = "\"perm\": [1, 2";
        text.replace(text.find(needle), needle.size(), "\"perm\": [1, 1");
        std::istringstream in(text);
        CHECK_THROWS_AS(load_model(in), Error);
    }
}

TEST_CASE("sha256 digests match the published vectors", "[model]") {
    TempDir dir;
    const std::string empty_path = dir.file("empty.bin");
    write_file(empty_path, "");
    CHECK(sha256_file(empty_path) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc_path = dir.file("abc.bin");
    write_file(abc_path, "abc");
    CHECK(sha256_file(abc_path) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("input verification detects tampering", "[model]") {
    TempDir dir;
    const std::string input_path = dir.file("training.csv");
    write_file(input_path, "# rate_hz=100\nt,ax,ay,az\n0,0,0,0\n");

    ModelFile file = make_model_file();
    file.provenance.inputs.clear();
    file.provenance.inputs.push_back({input_path, sha256_file(input_path)});
    CHECK_NOTHROW(verify_model_inputs(file));

    write_file(input_path, "# rate_hz=100\nt,ax,ay,az\n0,0,0,1\n");
    CHECK_THROWS_AS(verify_model_inputs(file), Error);

    file.provenance.inputs[0].path = dir.file("gone.csv");
    try {
        verify_model_inputs(file);
        FAIL("expected an I/O error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
}

TEST_CASE("model files written to disk reload identically", "[model]") {
    TempDir dir;
    const ModelFile file = make_model_file();
    const std::string path = dir.file("model.json");
    save_model_file(path, file);
    const ModelFile reloaded = load_model_file(path);
    std::ostringstream a, b;
    save_model(a, file);
    save_model(b, reloaded);
    CHECK(a.str() == b.str());
    CHECK(read_file(path) == a.str());
}
