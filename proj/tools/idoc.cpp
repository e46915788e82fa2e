#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "idoc/bench.hpp"
#include "idoc/checksum.hpp"
#include "idoc/corpus.hpp"
#include "idoc/embedding_file.hpp"
#include "idoc/encoder.hpp"
#include "idoc/error.hpp"
#include "idoc/eval.hpp"
#include "idoc/index.hpp"
#include "idoc/parallel.hpp"
#include "idoc/proposer.hpp"
#include "idoc/version.hpp"
#include "json_config.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace idoc::cli {
namespace {

struct Globals {
    unsigned threads = default_thread_count();
    std::uint64_t seed = 7;
};

std::pair<int, int> parse_size(const std::string& text, const std::string& what)
{
    const auto x = text.find_first_of("xX");
    int w = 0;
    int h = 0;
    const bool ok = x != std::string::npos &&
                    std::from_chars(text.data(), text.data() + x, w).ptr == text.data() + x &&
                    std::from_chars(text.data() + x + 1, text.data() + text.size(), h).ptr ==
                        text.data() + text.size();
    if (!ok || w < 1 || h < 1) {
        throw_usage_error(what + " must look like WIDTHxHEIGHT, got '" + text + "'");
    }
    return {w, h};
}

void write_text(const fs::path& file, const std::string& text)
{
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    write_file_atomic(file, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

void write_json(const fs::path& file, const ordered_json& j)
{
    write_text(file, j.dump(2) + "\n");
}

std::string file_hash(const fs::path& file)
{
    return "crc32:" + hex32(crc32_file(file));
}

ordered_json run_record(const std::string& command, ordered_json config, ordered_json inputs)
{
    return ordered_json{{"command", command},
                        {"engine_version", kEngineVersion},
                        {"config", std::move(config)},
                        {"inputs", std::move(inputs)}};
}

void require_path(const std::string& value, const std::string& flag)
{
    if (value.empty()) {
        throw_usage_error(flag + " is required");
    }
}

std::string resolve_timestamp(const std::string& flag)
{
    if (!flag.empty()) {
        return flag;
    }
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (epoch == nullptr || *epoch == '\0') {
        return "1970-01-01T00:00:00Z";
    }
    long long seconds = 0;
    const std::string text(epoch);
    if (std::from_chars(text.data(), text.data() + text.size(), seconds).ptr != text.data() + text.size()) {
        throw_usage_error("SOURCE_DATE_EPOCH must be an integer, got '" + text + "'");
    }
    const std::time_t t = static_cast<std::time_t>(seconds);
    std::tm utc{};
    gmtime_r(&t, &utc);
    char out[32];
    std::strftime(out, sizeof out, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return out;
}

std::map<std::string, fs::path> page_files(const fs::path& dir)
{
    std::map<std::string, fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
            out[entry.path().stem().string()] = dir / entry.path().filename();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared option groups

struct ProposerArgs {
    std::string kind = "saliency";
    std::string detections;
    double min_score = 0.01;
    double nms_iou = 0.5;
    std::vector<std::string> grid_cells{"64x64"};
    double grid_stride_fraction = 0.5;
    double gradient_threshold = 100.0;
    int min_component_area = 50;

    void add(CLI::App* app)
    {
        app->add_option("--proposer", kind, "detections|grid|saliency")->capture_default_str();
        app->add_option("--detections", detections, "Detections JSONL (proposer=detections)");
        app->add_option("--min-score", min_score, "Drop proposals scoring below this")->capture_default_str();
        app->add_option("--nms-iou", nms_iou, "Proposal NMS IoU threshold")->capture_default_str();
        app->add_option("--grid-cell", grid_cells, "Grid cell size WxH; repeatable")->capture_default_str();
        app->add_option("--grid-stride-fraction", grid_stride_fraction, "Grid stride as a fraction of the cell")
            ->capture_default_str();
        app->add_option("--gradient-threshold", gradient_threshold, "Saliency Sobel magnitude threshold")
            ->capture_default_str();
        app->add_option("--min-component-area", min_component_area, "Saliency minimum component area (px)")
            ->capture_default_str();
    }

    ProposerConfig resolve() const
    {
        ProposerConfig cfg;
        cfg.kind = proposer_kind_from_string(kind);
        cfg.detections_file = detections;
        cfg.min_score = min_score;
        cfg.nms_iou = nms_iou;
        cfg.grid_cells.clear();
        for (const std::string& cell : grid_cells) {
            const auto [w, h] = parse_size(cell, "--grid-cell");
            cfg.grid_cells.push_back(GridCell{w, h});
        }
        cfg.grid_stride_fraction = grid_stride_fraction;
        cfg.gradient_threshold = gradient_threshold;
        cfg.min_component_area = min_component_area;
        if (cfg.kind == ProposerKind::detections) {
            require_path(detections, "--detections");
        }
        cfg.validate();
        return cfg;
    }
};

struct EncoderArgs {
    std::string kind = "color-hist";
    int color_bins = 4;
    int orientation_bins = 9;
    int spatial_cells = 2;
    int canonical_size = 224;
    std::string embeddings;

    void add(CLI::App* app)
    {
        app->add_option("--encoder", kind, "color-hist|grad-hist|external")->capture_default_str();
        app->add_option("--color-bins", color_bins, "Bins per channel (color-hist)")->capture_default_str();
        app->add_option("--orientation-bins", orientation_bins, "Orientation bins (grad-hist)")
            ->capture_default_str();
        app->add_option("--spatial-cells", spatial_cells, "Cells per side (grad-hist)")->capture_default_str();
        app->add_option("--canonical-size", canonical_size, "Patch resize target (px)")->capture_default_str();
        app->add_option("--embeddings", embeddings, "Region embedding file (encoder=external)");
    }

    EncoderSpec resolve() const
    {
        EncoderSpec spec;
        spec.kind = encoder_kind_from_string(kind);
        spec.color_bins = color_bins;
        spec.orientation_bins = orientation_bins;
        spec.spatial_cells = spatial_cells;
        spec.canonical_size = canonical_size;
        if (spec.kind == EncoderKind::external) {
            require_path(embeddings, "--embeddings");
        } else {
            spec.validate();
        }
        return spec;
    }
};

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    SynthParams params;
    std::string page_size = "602x920";
    std::string out;
};

void cmd_synth(const SynthArgs& a, const Globals& g)
{
    require_path(a.out, "--out");
    SynthParams params = a.params;
    std::tie(params.page_width, params.page_height) = parse_size(a.page_size, "--page-size");
    params.seed = g.seed;
    const Corpus corpus = generate_synthetic(params);
    write_corpus(corpus, a.out);

    const ordered_json config{{"pages", params.pages},
                              {"categories", params.categories},
                              {"occurrences_per_category", params.occurrences_per_category},
                              {"page_size", {params.page_width, params.page_height}},
                              {"seed", params.seed}};
    const ordered_json inputs{{"corpus_id", corpus_fingerprint(corpus.pages)}};
    write_json(fs::path(a.out) / "run.json", run_record("synth", config, inputs));
}

// ---------------------------------------------------------------------------
// convert

struct ConvertArgs {
    std::string annotations;
    std::string pages;
    std::string out;
};

void cmd_convert(const ConvertArgs& a)
{
    require_path(a.annotations, "--annotations");
    require_path(a.out, "--out");
    GroundTruth truth = convert_docexplore(a.annotations);
    ordered_json inputs{{"annotations", a.annotations}, {"annotations_hash", file_hash(a.annotations)}};
    if (!a.pages.empty()) {
        const std::vector<Page> pages = load_pages(a.pages);
        resolve_queries(truth, pages);
        inputs["corpus_id"] = corpus_fingerprint(pages);
    }
    write_groundtruth(truth, fs::path(a.out) / "gt.json");
    const ordered_json config{{"annotations", a.annotations}, {"pages", a.pages}};
    write_json(fs::path(a.out) / "run.json", run_record("convert", config, inputs));
}

// ---------------------------------------------------------------------------
// propose

struct ProposeArgs {
    std::string pages;
    std::string groundtruth;
    ProposerArgs proposer;
    std::string out;
};

void cmd_propose(const ProposeArgs& a, const Globals& g)
{
    require_path(a.pages, "--pages");
    require_path(a.out, "--out");
    const ProposerConfig cfg = a.proposer.resolve();
    const std::vector<Page> pages = load_pages(a.pages);
    const auto files = page_files(a.pages);
    const std::vector<std::vector<Region>> per_page = propose(pages, cfg, g.threads);

    std::string jsonl;
    ordered_json items = ordered_json::array();
    for (std::size_t p = 0; p < pages.size(); ++p) {
        const std::string image = files.at(pages[p].page_id).string();
        for (std::size_t r = 0; r < per_page[p].size(); ++r) {
            const Region& region = per_page[p][r];
            const std::string id = region_id(region.page_id, r);
            const ordered_json line{{"id", id},          {"page_id", region.page_id}, {"region_index", r},
                                    {"x", region.bbox.x}, {"y", region.bbox.y},       {"w", region.bbox.w},
                                    {"h", region.bbox.h}, {"score", region.score},    {"label", region.label}};
            jsonl += line.dump() + "\n";
            items.push_back(ordered_json{{"id", id},
                                         {"image_path", image},
                                         {"bbox", {region.bbox.x, region.bbox.y, region.bbox.w, region.bbox.h}}});
        }
    }

    ordered_json inputs{{"corpus_id", corpus_fingerprint(pages)}};
    ordered_json queries = ordered_json::array();
    if (!a.groundtruth.empty()) {
        GroundTruth truth = read_groundtruth(a.groundtruth);
        resolve_queries(truth, pages);
        inputs["groundtruth_hash"] = file_hash(a.groundtruth);
        for (const Query& q : truth.queries) {
            queries.push_back(ordered_json{{"id", q.query_id},
                                           {"image_path", files.at(q.source_page_id).string()},
                                           {"bbox", {q.bbox.x, q.bbox.y, q.bbox.w, q.bbox.h}}});
        }
    }
    if (cfg.kind == ProposerKind::detections) {
        inputs["detections_hash"] = file_hash(cfg.detections_file);
    }

    write_text(fs::path(a.out) / "regions.jsonl", jsonl);
    write_json(fs::path(a.out) / "export_manifest.json", ordered_json{{"items", items}});
    if (!a.groundtruth.empty()) {
        write_json(fs::path(a.out) / "query_manifest.json", ordered_json{{"items", queries}});
    }
    const ordered_json config{{"pages", a.pages}, {"groundtruth", a.groundtruth}, {"proposer", cfg.to_json()}};
    write_json(fs::path(a.out) / "run.json", run_record("propose", config, inputs));
}

// ---------------------------------------------------------------------------
// build-index

struct BuildArgs {
    std::string pages;
    ProposerArgs proposer;
    EncoderArgs encoder;
    std::string timestamp;
    std::string out;
};

void cmd_build(const BuildArgs& a, const Globals& g)
{
    require_path(a.pages, "--pages");
    require_path(a.out, "--out");
    const ProposerConfig proposer = a.proposer.resolve();
    const EncoderSpec spec = a.encoder.resolve();
    const std::vector<Page> pages = load_pages(a.pages);

    std::optional<EmbeddingMap> external;
    ordered_json inputs{{"corpus_id", corpus_fingerprint(pages)}};
    if (spec.kind == EncoderKind::external) {
        external = load_embeddings(a.encoder.embeddings);
        inputs["embeddings_hash"] = file_hash(a.encoder.embeddings);
    }
    if (proposer.kind == ProposerKind::detections) {
        inputs["detections_hash"] = file_hash(proposer.detections_file);
    }

    BuildOptions options;
    options.threads = g.threads;
    options.build_timestamp = resolve_timestamp(a.timestamp);
    options.config = run_record("build-index",
                                ordered_json{{"pages", a.pages},
                                             {"proposer", proposer.to_json()},
                                             {"encoder", spec.to_json()},
                                             {"embeddings", a.encoder.embeddings}},
                                inputs);
    const SearchIndex index = build_index(pages, proposer, spec, external ? &*external : nullptr, options);
    persist(index, a.out);
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
    std::string index;
    std::string groundtruth;
    std::string pages;
    std::string query;
    std::string query_id;
    std::string query_embeddings;
    std::size_t top_k = 1000;
    double result_nms = -1.0;
    CLI::Option* result_nms_option = nullptr;
    bool allow_encoder_mismatch = false;
    std::string out;
};

struct NamedQueries {
    std::vector<std::string> ids;
    std::vector<Embedding> embeddings;
};

NamedQueries load_query_embeddings(const SearchArgs& a)
{
    const EmbeddingFile file = read_embedding_file(a.query_embeddings);
    NamedQueries out;
    auto take = [&](std::size_t i) {
        const auto v = file.vector(i);
        out.ids.push_back(file.ids[i]);
        out.embeddings.push_back(Embedding{std::vector<float>(v.begin(), v.end()), file.encoder_id});
    };
    if (a.groundtruth.empty()) {
        for (std::size_t i = 0; i < file.count(); ++i) {
            take(i);
        }
        return out;
    }
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < file.count(); ++i) {
        position[file.ids[i]] = i;
    }
    for (const Query& q : read_groundtruth(a.groundtruth).queries) {
        auto it = position.find(q.query_id);
        if (it == position.end()) {
            throw_data_error("query embedding file has no vector for query '" + q.query_id + "'");
        }
        take(it->second);
    }
    return out;
}

NamedQueries encode_queries(const SearchArgs& a, const EncoderSpec& spec, const Globals& g, ordered_json& inputs)
{
    if (spec.kind == EncoderKind::external) {
        throw_usage_error("the index uses an external encoder; pass --query-embeddings");
    }
    NamedQueries out;
    if (!a.query.empty()) {
        const cv::Mat image = cv::imread(a.query, cv::IMREAD_COLOR);
        if (image.empty()) {
            throw_data_error("cannot decode query image " + a.query);
        }
        inputs["query_hash"] = file_hash(a.query);
        out.ids.push_back(a.query_id.empty() ? fs::path(a.query).stem().string() : a.query_id);
        out.embeddings.push_back(encode(image, spec));
        return out;
    }
    require_path(a.groundtruth, "--gt (or --query / --query-embeddings)");
    require_path(a.pages, "--pages");
    const Corpus corpus = load_corpus(a.pages, a.groundtruth);
    inputs["corpus_id"] = corpus_fingerprint(corpus.pages);
    const std::vector<Query>& queries = corpus.truth.queries;
    out.embeddings.resize(queries.size());
    parallel_for(queries.size(), g.threads,
                 [&](std::size_t i) { out.embeddings[i] = encode(queries[i].image, spec); });
    for (const Query& q : queries) {
        out.ids.push_back(q.query_id);
    }
    return out;
}

void cmd_search(const SearchArgs& a, const Globals& g)
{
    require_path(a.index, "--index");
    require_path(a.out, "--out");
    const SearchIndex index = load_index(a.index);
    ordered_json inputs{{"index_manifest_hash", file_hash(fs::path(a.index) / "manifest.json")},
                        {"index_checksum_hash", file_hash(fs::path(a.index) / "checksum")}};
    if (!a.groundtruth.empty()) {
        inputs["groundtruth_hash"] = file_hash(a.groundtruth);
    }

    NamedQueries queries;
    if (!a.query_embeddings.empty()) {
        queries = load_query_embeddings(a);
        inputs["query_embeddings_hash"] = file_hash(a.query_embeddings);
    } else {
        queries = encode_queries(a, index.manifest().encoder, g, inputs);
    }

    SearchOptions options;
    options.top_k = a.top_k;
    options.allow_encoder_mismatch = a.allow_encoder_mismatch;
    if (a.result_nms_option->count() > 0) {
        options.result_nms_iou = a.result_nms;
    }
    const BatchResult batch = search_batch(index, queries.embeddings, options, g.threads);
    write_results(to_result_set(queries.ids, batch.results), fs::path(a.out) / "results.jsonl");

    const ordered_json config{{"index", a.index},
                              {"groundtruth", a.groundtruth},
                              {"pages", a.pages},
                              {"query", a.query},
                              {"query_id", a.query_id},
                              {"query_embeddings", a.query_embeddings},
                              {"top_k", options.top_k},
                              {"result_nms", options.result_nms_iou ? ordered_json(*options.result_nms_iou)
                                                                    : ordered_json(nullptr)},
                              {"allow_encoder_mismatch", options.allow_encoder_mismatch}};
    write_json(fs::path(a.out) / "run.json", run_record("search", config, inputs));
    write_json(fs::path(a.out) / "timing.json", ordered_json{{"queries", batch.timing.queries},
                                                             {"regions", batch.timing.regions},
                                                             {"comparisons", batch.timing.comparisons},
                                                             {"total_ms", batch.timing.total_ms},
                                                             {"mean_ms", batch.timing.mean_ms}});
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string results;
    std::string groundtruth;
    std::string task = "spotting";
    double iou = 0.5;
    std::size_t top_k = 1000;
    double area_threshold = 10000.0;
    double aspect_threshold = 1.5;
    bool exclude_self = false;
    bool by_category = false;
    std::string out;
};

void cmd_eval(const EvalArgs& a)
{
    require_path(a.results, "--results");
    require_path(a.groundtruth, "--gt");
    require_path(a.out, "--out");
    EvalConfig cfg;
    cfg.task = eval_task_from_string(a.task);
    cfg.iou_threshold = a.iou;
    cfg.top_k = a.top_k;
    cfg.taxonomy = TaxonomyThresholds{a.area_threshold, a.aspect_threshold};
    cfg.exclude_self = a.exclude_self;
    cfg.validate();

    const auto start = std::chrono::steady_clock::now();
    const GroundTruth truth = read_groundtruth(a.groundtruth);
    const ResultSet results = read_results(a.results);
    EvalReport report = evaluate(results, truth, cfg);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    report.extra["run"] = run_record(
        "eval", ordered_json{{"results", a.results}, {"groundtruth", a.groundtruth}, {"by_category", a.by_category}},
        ordered_json{{"results_hash", file_hash(a.results)}, {"groundtruth_hash", file_hash(a.groundtruth)}});
    const fs::path out(a.out);
    write_json(out / "report.json", report.to_json());
    write_text(out / "report.csv", report.per_query_csv());
    if (a.by_category) {
        write_text(out / "report_by_category.csv", report.per_cell_csv());
    }
    write_json(out / "timing.json", ordered_json{{"queries", truth.queries.size()}, {"total_ms", ms}});
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string mode = "both";
    BenchConfig config;
    std::string page_size = "602x920";
    std::string query_cells = "1x1";
    std::string out;
};

void cmd_bench(const BenchArgs& a, const Globals& g)
{
    require_path(a.out, "--out");
    BenchConfig cfg = a.config;
    cfg.mode = bench_mode_from_string(a.mode);
    std::tie(cfg.page_width, cfg.page_height) = parse_size(a.page_size, "--page-size");
    std::tie(cfg.query_grid_w, cfg.query_grid_h) = parse_size(a.query_cells, "--query-cells");
    cfg.seed = g.seed;
    const BenchReport report = run_bench(cfg, g.threads);

    write_text(fs::path(a.out) / "bench.csv", report.csv());
    ordered_json j = report.to_json();
    j["command"] = "bench";
    j["engine_version"] = kEngineVersion;
    write_json(fs::path(a.out) / "bench.json", j);
    write_json(fs::path(a.out) / "counts.json", report.counts_json());
    std::cout << report.csv();
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
    std::string groundtruth;
    double target = 0.83;
    std::string out;
};

void cmd_calibrate(const CalibrateArgs& a)
{
    require_path(a.groundtruth, "--gt");
    require_path(a.out, "--out");
    const GroundTruth truth = read_groundtruth(a.groundtruth);
    const Calibration cal = calibrate_taxonomy(truth.queries, a.target);

    std::string csv = "area_threshold,aspect_threshold,small_non_square_fraction\n";
    for (const CalibrationPoint& p : cal.sweep) {
        csv += ordered_json(p.area).dump() + "," + ordered_json(p.aspect).dump() + "," +
               ordered_json(p.small_non_square_fraction).dump() + "\n";
    }
    const TaxonomyThresholds defaults;
    const ordered_json j{
        {"command", "calibrate"},
        {"engine_version", kEngineVersion},
        {"config", {{"groundtruth", a.groundtruth}, {"target", a.target}}},
        {"inputs", {{"groundtruth_hash", file_hash(a.groundtruth)}}},
        {"queries", truth.queries.size()},
        {"best",
         {{"area_threshold", cal.best.area},
          {"aspect_threshold", cal.best.aspect},
          {"small_non_square_fraction", cal.best.small_non_square_fraction}}},
        {"defaults", {{"area_threshold", defaults.area}, {"aspect_threshold", defaults.aspect}}},
        {"sweep_points", cal.sweep.size()}};
    write_json(fs::path(a.out) / "calibration.json", j);
    write_text(fs::path(a.out) / "calibration.csv", csv);
}

// ---------------------------------------------------------------------------

std::string env_name(const std::string& sub, const std::string& option)
{
    std::string out = "IDOC_";
    for (char c : sub + "_" + option) {
        out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string config_argument(int argc, char** argv)
{
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) {
            return argv[i + 1];
        }
        if (arg.rfind("--config=", 0) == 0) {
            return arg.substr(9);
        }
    }
    return {};
}

void print_error(const char* kind, const std::string& message)
{
    std::string line = message;
    std::replace(line.begin(), line.end(), '\n', ' ');
    std::cerr << "idoc: error[" << kind << "]: " << line << "\n";
}

int run(int argc, char** argv)
{
    CLI::App app{"Pattern spotting and document retrieval over page images", "idoc"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string("idoc ") + kEngineVersion + " (" + kIndexFormatName + " v" +
                                          std::to_string(kIndexFormatVersion) + ", embeddings " +
                                          kEmbeddingFormatName + ")");
    app.set_config("--config", "", "Config file: TOML, or JSON when the name ends in .json");
    const std::string config_file = config_argument(argc, argv);
    if (fs::path(config_file).extension() == ".json") {
        app.config_formatter(std::make_shared<JsonConfig>());
    }

    Globals globals;
    app.add_option("--threads", globals.threads, "Worker threads (default: all cores)")
        ->envname("IDOC_THREADS")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", globals.seed, "Seed for every random choice")->envname("IDOC_SEED")->capture_default_str();

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a planted-pattern corpus");
    s->add_option("--pages", synth.params.pages, "Page count")->capture_default_str();
    s->add_option("--categories", synth.params.categories, "Pattern categories")->capture_default_str();
    s->add_option("--occ", synth.params.occurrences_per_category, "Occurrences per category")->capture_default_str();
    s->add_option("--page-size", synth.page_size, "Page size WxH")->capture_default_str();
    s->add_option("--out", synth.out, "Output directory");

    ConvertArgs convert;
    auto* c = app.add_subcommand("convert", "Convert DocExplore annotations to gt.json");
    c->add_option("--annotations", convert.annotations, "Annotation CSV");
    c->add_option("--pages", convert.pages, "Page image directory (optional cross-check)");
    c->add_option("--out", convert.out, "Output directory");

    ProposeArgs prop;
    auto* p = app.add_subcommand("propose", "Write region proposals and an export manifest");
    p->add_option("--pages", prop.pages, "Page image directory");
    p->add_option("--gt", prop.groundtruth, "Ground truth; adds a query manifest");
    prop.proposer.add(p);
    p->add_option("--out", prop.out, "Output directory");

    BuildArgs build;
    auto* b = app.add_subcommand("build-index", "Propose, encode and persist an index");
    b->add_option("--pages", build.pages, "Page image directory");
    build.proposer.add(b);
    build.encoder.add(b);
    b->add_option("--timestamp", build.timestamp, "Build timestamp (default: SOURCE_DATE_EPOCH or 1970)");
    b->add_option("--out", build.out, "Index directory");

    SearchArgs search;
    auto* q = app.add_subcommand("search", "Rank index regions against queries");
    q->add_option("--index", search.index, "Index directory");
    q->add_option("--gt", search.groundtruth, "Ground truth whose queries are searched");
    q->add_option("--pages", search.pages, "Page directory holding the query source pages");
    q->add_option("--query", search.query, "A single query image");
    q->add_option("--query-id", search.query_id, "Id of --query (default: file stem)");
    q->add_option("--query-embeddings", search.query_embeddings, "Query embedding file (external encoders)");
    q->add_option("--top-k", search.top_k, "Hits per query")->capture_default_str()->check(CLI::PositiveNumber);
    search.result_nms_option =
        q->add_option("--result-nms", search.result_nms, "Per-page NMS IoU over ranked hits")
            ->check(CLI::Range(0.0, 1.0));
    q->add_flag("--allow-encoder-mismatch", search.allow_encoder_mismatch, "Search across encoder ids");
    q->add_option("--out", search.out, "Output directory");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score results against ground truth");
    e->add_option("--results", ev.results, "Results JSONL");
    e->add_option("--gt", ev.groundtruth, "Ground truth JSON");
    e->add_option("--task", ev.task, "spotting|retrieval")->capture_default_str();
    e->add_option("--iou", ev.iou, "Spotting relevance IoU threshold")->capture_default_str();
    e->add_option("--top-k", ev.top_k, "Ranked items scored per query")->capture_default_str();
    e->add_option("--area-threshold", ev.area_threshold, "Big iff w*h >= this")->capture_default_str();
    e->add_option("--aspect-threshold", ev.aspect_threshold, "Square iff long/short <= this")
        ->capture_default_str();
    e->add_flag("--exclude-self", ev.exclude_self, "Ignore each query's own source region");
    e->add_flag("--by-category", ev.by_category, "Also write the size x shape table");
    e->add_option("--out", ev.out, "Output directory");

    BenchArgs bench;
    auto* m = app.add_subcommand("bench", "Sparse vs dense matching cost on a synthetic profile");
    m->add_option("--mode", bench.mode, "sparse|dense|both")->capture_default_str();
    m->add_option("--pages", bench.config.pages, "Pages in the profile")->capture_default_str();
    m->add_option("--queries", bench.config.queries, "Queries in the profile")->capture_default_str();
    m->add_option("--regions-per-page", bench.config.regions_per_page, "Sparse regions per page")
        ->capture_default_str();
    m->add_option("--dim", bench.config.dim, "Embedding dimension")->capture_default_str();
    m->add_option("--page-size", bench.page_size, "Page size WxH")->capture_default_str();
    m->add_option("--stride", bench.config.stride, "Dense feature-map stride (px)")->capture_default_str();
    m->add_option("--query-cells", bench.query_cells, "Dense query map size in cells WxH")->capture_default_str();
    m->add_option("--dense-pages", bench.config.dense_sample_pages, "Pages the dense matcher actually runs on")
        ->capture_default_str();
    m->add_option("--dense-queries", bench.config.dense_sample_queries, "Queries the dense matcher actually runs")
        ->capture_default_str();
    m->add_option("--top-k", bench.config.top_k, "Hits kept per query")->capture_default_str();
    m->add_option("--out", bench.out, "Output directory");

    CalibrateArgs cal;
    auto* t = app.add_subcommand("calibrate", "Fit taxonomy thresholds to a small/non-square share");
    t->add_option("--gt", cal.groundtruth, "Ground truth JSON");
    t->add_option("--target", cal.target, "Target small/non-square fraction")->capture_default_str();
    t->add_option("--out", cal.out, "Output directory");

    for (CLI::App* sub : app.get_subcommands({})) {
        for (CLI::Option* opt : sub->get_options()) {
            if (!opt->get_lnames().empty() && opt->get_lnames().front() != "help" && opt->get_envname().empty()) {
                opt->envname(env_name(sub->get_name(), opt->get_lnames().front()));
            }
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForVersion& err) {
        return app.exit(err);
    } catch (const CLI::FileError& err) {
        print_error("data", err.what());
        return static_cast<int>(ErrorKind::data);
    } catch (const CLI::ParseError& err) {
        print_error("usage", err.what());
        return static_cast<int>(ErrorKind::usage);
    }

    if (s->parsed()) {
        cmd_synth(synth, globals);
    } else if (c->parsed()) {
        cmd_convert(convert);
    } else if (p->parsed()) {
        cmd_propose(prop, globals);
    } else if (b->parsed()) {
        cmd_build(build, globals);
    } else if (q->parsed()) {
        cmd_search(search, globals);
    } else if (e->parsed()) {
        cmd_eval(ev);
    } else if (m->parsed()) {
        cmd_bench(bench, globals);
    } else if (t->parsed()) {
        cmd_calibrate(cal);
    }
    return 0;
}

}  // namespace
}  // namespace idoc::cli

int main(int argc, char** argv)
{
    using idoc::cli::print_error;
    try {
        return idoc::cli::run(argc, argv);
    } catch (const idoc::Error& e) {
        const char* kind = e.kind() == idoc::ErrorKind::usage  ? "usage"
                           : e.kind() == idoc::ErrorKind::data ? "data"
                                                               : "internal";
        print_error(kind, e.what());
        return static_cast<int>(e.kind());
    } catch (const fs::filesystem_error& e) {
        print_error("data", e.what());
        return static_cast<int>(idoc::ErrorKind::data);
    } catch (const cv::Exception& e) {
        print_error("data", e.what());
        return static_cast<int>(idoc::ErrorKind::data);
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return static_cast<int>(idoc::ErrorKind::internal);
    }
}
