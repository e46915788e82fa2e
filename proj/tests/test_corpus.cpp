#include <gtest/gtest.h>

#include <opencv2/imgcodecs.hpp>

#include "idoc/corpus.hpp"
#include "idoc/error.hpp"
#include "support.hpp"

using namespace idoc;
using idoc::testing::Gen;
using idoc::testing::TempDir;
using idoc::testing::spit;
using nlohmann::json;

namespace {

std::string error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

void write_page(const std::filesystem::path& dir, const std::string& id, int w = 40, int h = 30)
{
    std::filesystem::create_directories(dir);
    cv::imwrite((dir / (id + ".png")).string(), cv::Mat(h, w, CV_8UC3, cv::Scalar(10, 20, 30)));
}

}  // namespace

TEST(GroundTruth, QueryWithoutOccurrenceIsSchemaViolation)
{
    const json doc = json::parse(R"({"categories":["a"],
        "queries":[{"query_id":"q","category":"a","page_id":"p1","bbox":[0,0,5,5]}],
        "occurrences":[]})");
    const std::string msg = error_of([&] { groundtruth_from_json(doc); });
    EXPECT_NE(msg.find("schema violation"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'q'"), std::string::npos) << msg;
}

TEST(GroundTruth, UnknownCategoryAndDuplicatesRejected)
{
    EXPECT_THROW(groundtruth_from_json(json::parse(R"({"categories":["a"],"queries":[],
        "occurrences":[{"category":"b","page_id":"p","bbox":[0,0,1,1]}]})")),
                 Error);
    EXPECT_THROW(groundtruth_from_json(json::parse(R"({"categories":["a","a"],"queries":[],"occurrences":[]})")),
                 Error);
    EXPECT_THROW(groundtruth_from_json(json::parse(R"({"categories":["a"],"queries":[],
        "occurrences":[{"category":"a","page_id":"p","bbox":[0,0,0,1]}]})")),
                 Error);
    EXPECT_THROW(groundtruth_from_json(json::parse(R"({"categories":["a"]})")), Error);
}

TEST(GroundTruth, DanglingPageReferenceNamesThePage)
{
    TempDir dir;
    write_page(dir / "pages", "p1");
    write_page(dir / "pages", "p2");
    spit(dir / "gt.json", R"({"categories":["a"],
        "queries":[{"query_id":"q","category":"a","page_id":"p1","bbox":[0,0,5,5]}],
        "occurrences":[{"category":"a","page_id":"p1","bbox":[0,0,5,5]},
                       {"category":"a","page_id":"p3","bbox":[0,0,5,5]}]})");
    const std::string msg = error_of([&] { load_corpus(dir / "pages", dir / "gt.json"); });
    EXPECT_NE(msg.find("'p3'"), std::string::npos) << msg;
}

TEST(GroundTruth, MissingFileAndUndecodableImage)
{
    TempDir dir;
    EXPECT_NE(error_of([&] { read_groundtruth(dir / "absent.json"); }).find("absent.json"), std::string::npos);
    std::filesystem::create_directories(dir / "pages");
    spit(dir / "pages" / "broken.png", "not a png");
    EXPECT_NE(error_of([&] { load_pages(dir / "pages"); }).find("broken.png"), std::string::npos);
}

TEST(GroundTruth, QueryOutsidePageRejected)
{
    TempDir dir;
    write_page(dir / "pages", "p1", 40, 30);
    spit(dir / "gt.json", R"({"categories":["a"],
        "queries":[{"query_id":"q","category":"a","page_id":"p1","bbox":[30,20,20,20]}],
        "occurrences":[{"category":"a","page_id":"p1","bbox":[30,20,20,20]}]})");
    EXPECT_THROW(load_corpus(dir / "pages", dir / "gt.json"), Error);
}

TEST(GroundTruth, LoadedPagesAreSortedAndQueriesCropped)
{
    TempDir dir;
    write_page(dir / "pages", "b");
    write_page(dir / "pages", "a");
    spit(dir / "gt.json", R"({"categories":["x"],
        "queries":[{"query_id":"q","category":"x","page_id":"b","bbox":[1,2,7,5]}],
        "occurrences":[{"category":"x","page_id":"b","bbox":[1,2,7,5]}]})");
    const Corpus c = load_corpus(dir / "pages", dir / "gt.json");
    ASSERT_EQ(c.pages.size(), 2u);
    EXPECT_EQ(c.pages[0].page_id, "a");
    EXPECT_EQ(c.pages[1].page_id, "b");
    EXPECT_EQ(c.truth.queries[0].image.cols, 7);
    EXPECT_EQ(c.truth.queries[0].image.rows, 5);
}

TEST(GroundTruth, RoundTripIsIdentity)
{
    TempDir dir;
    const Corpus c = generate_synthetic(SynthParams{4, 3, 3, 300, 300, 11});
    write_groundtruth(c.truth, dir / "gt.json");
    const GroundTruth once = read_groundtruth(dir / "gt.json");
    EXPECT_TRUE(same_annotations(once, c.truth));
    write_groundtruth(once, dir / "gt2.json");
    EXPECT_EQ(idoc::testing::slurp(dir / "gt.json"), idoc::testing::slurp(dir / "gt2.json"));
}

TEST(Synthetic, SingleGlyph)
{
    const Corpus c = generate_synthetic(SynthParams{1, 1, 1, 602, 920, 5});
    ASSERT_EQ(c.truth.queries.size(), 1u);
    ASSERT_EQ(c.truth.occurrences.size(), 1u);
    EXPECT_EQ(c.truth.queries[0].bbox, c.truth.occurrences[0].bbox);
    EXPECT_EQ(c.truth.queries[0].source_page_id, c.truth.occurrences[0].page_id);
}

TEST(Synthetic, SameSeedIsBitIdentical)
{
    const SynthParams params{3, 4, 2, 200, 240, 99};
    const Corpus a = generate_synthetic(params);
    const Corpus b = generate_synthetic(params);
    ASSERT_EQ(a.pages.size(), b.pages.size());
    for (std::size_t i = 0; i < a.pages.size(); ++i) {
        EXPECT_EQ(a.pages[i].page_id, b.pages[i].page_id);
        EXPECT_EQ(cv::norm(a.pages[i].image, b.pages[i].image, cv::NORM_INF), 0.0);
    }
    EXPECT_TRUE(same_annotations(a.truth, b.truth));
    EXPECT_EQ(corpus_fingerprint(a.pages), corpus_fingerprint(b.pages));

    SynthParams other = params;
    other.seed = 100;
    EXPECT_NE(corpus_fingerprint(generate_synthetic(other).pages), corpus_fingerprint(a.pages));
}

TEST(Synthetic, DefaultProfileHasNoOverlaps)
{
    const Corpus c = generate_synthetic(SynthParams{10, 5, 4, 602, 920, 7});
    const auto& occ = c.truth.occurrences;
    ASSERT_EQ(occ.size(), 20u);
    EXPECT_EQ(c.truth.queries.size(), 5u);
    EXPECT_EQ(c.truth.categories.size(), 5u);
    for (std::size_t i = 0; i < occ.size(); ++i) {
        EXPECT_GE(occ[i].bbox.x, 0);
        EXPECT_GE(occ[i].bbox.y, 0);
        EXPECT_LE(occ[i].bbox.right(), 602);
        EXPECT_LE(occ[i].bbox.bottom(), 920);
        for (std::size_t j = i + 1; j < occ.size(); ++j) {
            if (occ[i].page_id == occ[j].page_id) {
                EXPECT_EQ(iou(occ[i].bbox, occ[j].bbox), 0.0) << i << " vs " << j;
            }
        }
    }
}

TEST(Synthetic, QueryIsVerbatimCropOfItsOccurrence)
{
    const Corpus c = generate_synthetic(SynthParams{5, 3, 3, 400, 400, 3});
    for (const Query& q : c.truth.queries) {
        const Page* page = nullptr;
        for (const Page& p : c.pages) {
            if (p.page_id == q.source_page_id) {
                page = &p;
            }
        }
        ASSERT_NE(page, nullptr);
        const cv::Mat region = page->image(cv::Rect(q.bbox.x, q.bbox.y, q.bbox.w, q.bbox.h));
        EXPECT_EQ(cv::norm(region, q.image, cv::NORM_INF), 0.0);
    }
}

TEST(Synthetic, OvercrowdingSuggestsLargerPages)
{
    const std::string msg = error_of([] { generate_synthetic(SynthParams{1, 40, 10, 120, 120, 1}); });
    EXPECT_NE(msg.find("larger"), std::string::npos) << msg;
    EXPECT_THROW(generate_synthetic(SynthParams{0, 1, 1, 100, 100, 1}), Error);
}

TEST(Synthetic, WriteThenLoadPreservesPixels)
{
    TempDir dir;
    const Corpus c = generate_synthetic(SynthParams{2, 2, 2, 400, 400, 4});
    write_corpus(c, dir.path());
    const Corpus back = load_corpus(dir / "pages", dir / "gt.json");
    EXPECT_EQ(corpus_fingerprint(back.pages), corpus_fingerprint(c.pages));
    EXPECT_TRUE(same_annotations(back.truth, c.truth));
}

TEST(Taxonomy, HandExamples)
{
    const TaxonomyThresholds d;
    EXPECT_EQ(categorize_query(BBox{0, 0, 120, 30}, d), (QueryCell{SizeClass::small, ShapeClass::non_square}));
    EXPECT_EQ(categorize_query(BBox{0, 0, 100, 100}, d), (QueryCell{SizeClass::big, ShapeClass::square}));
    EXPECT_EQ(categorize_query(BBox{0, 0, 1, 1}, d), (QueryCell{SizeClass::small, ShapeClass::square}));
    EXPECT_EQ(categorize_query(BBox{0, 0, 1, 1}, TaxonomyThresholds{1.0, 1.0}),
              (QueryCell{SizeClass::big, ShapeClass::square}));
    EXPECT_EQ(cell_name({SizeClass::small, ShapeClass::non_square}), "small-non-square");
}

TEST(Taxonomy, CellsPartitionEveryQuerySet)
{
    Gen gen(8);
    for (int trial = 0; trial < 200; ++trial) {
        const TaxonomyThresholds t{gen.real(1.0, 20000.0), gen.real(1.0, 4.0)};
        const auto cells = all_cells();
        for (int i = 0; i < 50; ++i) {
            const BBox b{0, 0, gen.integer(1, 300), gen.integer(1, 300)};
            const QueryCell c = categorize_query(b, t);
            EXPECT_EQ(std::count(cells.begin(), cells.end(), c), 1);
        }
    }
}

TEST(Taxonomy, CalibrationHitsReachableTarget)
{
    std::vector<Query> queries;
    // 8 small elongated, 2 big square: 80% small/non-square under defaults.
    for (int i = 0; i < 8; ++i) {
        queries.push_back(Query{"s" + std::to_string(i), "a", "p", BBox{0, 0, 90, 30 + i}, {}});
    }
    queries.push_back(Query{"b0", "a", "p", BBox{0, 0, 150, 150}, {}});
    queries.push_back(Query{"b1", "a", "p", BBox{0, 0, 160, 150}, {}});
    const Calibration cal = calibrate_taxonomy(queries, 0.8);
    EXPECT_EQ(cal.best.small_non_square_fraction, 0.8);
    EXPECT_EQ(cal.best.aspect, 1.5);  // ties resolve toward the defaults
    EXPECT_FALSE(cal.sweep.empty());
    EXPECT_THROW(calibrate_taxonomy({}, 0.8), Error);
    EXPECT_THROW(calibrate_taxonomy(queries, 1.5), Error);
}

TEST(DocExploreConversion, InclusiveCornersAndSelfOccurrence)
{
    TempDir dir;
    spit(dir / "ann.csv",
         "type,id,category,page,x1,y1,x2,y2\n"
         "query,q1,lion,page_001.jpg,10,20,19,24\n"
         "occurrence,,lion,page_002.jpg,0,0,4,4\n"
         "occurrence,,eagle,page_002.jpg,30,30,40,35\n");
    const GroundTruth gt = convert_docexplore(dir / "ann.csv");
    ASSERT_EQ(gt.queries.size(), 1u);
    EXPECT_EQ(gt.queries[0].bbox, (BBox{10, 20, 10, 5}));
    EXPECT_EQ(gt.queries[0].source_page_id, "page_001");
    EXPECT_EQ(gt.occurrences.size(), 3u);  // the query's own region is added
    EXPECT_EQ(gt.categories, (std::vector<std::string>{"eagle", "lion"}));

    spit(dir / "bad.csv", "query,q1,lion,p,1,2,3\n");
    EXPECT_NE(error_of([&] { convert_docexplore(dir / "bad.csv"); }).find("line 1"), std::string::npos);
}
