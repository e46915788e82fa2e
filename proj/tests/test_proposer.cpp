#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "idoc/corpus.hpp"
#include "idoc/error.hpp"
#include "idoc/proposer.hpp"
#include "support.hpp"

using namespace idoc;
using idoc::testing::TempDir;
using idoc::testing::spit;

namespace {

Page blank_page(const std::string& id, int w, int h, int value = 200)
{
    return Page{id, cv::Mat(h, w, CV_8UC3, cv::Scalar(value, value, value))};
}

std::vector<Region> ingest_text(const std::string& text, const std::vector<Page>& pages, ProposerConfig cfg = {})
{
    TempDir dir;
    spit(dir / "det.jsonl", text);
    cfg.kind = ProposerKind::detections;
    cfg.detections_file = dir / "det.jsonl";
    return ingest_detections(cfg.detections_file, pages, cfg);
}

std::string error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Detections, LowScoreDropped)
{
    const std::vector<Page> pages{blank_page("p", 100, 100)};
    const auto regions = ingest_text(R"({"page_id":"p","x":0,"y":0,"w":10,"h":10,"score":0.005,"label":"a"}
{"page_id":"p","x":50,"y":50,"w":10,"h":10,"score":0.01,"label":"b"}
)",
                                     pages);
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_EQ(regions[0].label, "b");  // 0.01 itself passes
}

TEST(Detections, IdenticalDetectionsCollapse)
{
    const std::vector<Page> pages{blank_page("p", 100, 100)};
    const auto regions = ingest_text(R"({"page_id":"p","x":5,"y":5,"w":20,"h":20,"score":0.8,"label":"a"}
{"page_id":"p","x":5,"y":5,"w":20,"h":20,"score":0.9,"label":"b"}
)",
                                     pages);
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_EQ(regions[0].score, 0.9);
}

TEST(Detections, OvershootIsClipped)
{
    const std::vector<Page> pages{blank_page("p", 100, 80)};
    const auto regions =
        ingest_text(R"({"page_id":"p","x":80,"y":70,"w":30,"h":20,"score":0.5,"label":"a"})", pages);
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_EQ(regions[0].bbox, (BBox{80, 70, 20, 10}));
}

TEST(Detections, OrderIsPageThenScoreThenGeometry)
{
    const std::vector<Page> pages{blank_page("a", 100, 100), blank_page("b", 100, 100)};
    const auto regions = ingest_text(R"({"page_id":"b","x":0,"y":0,"w":10,"h":10,"score":0.9,"label":""}
{"page_id":"a","x":60,"y":0,"w":10,"h":10,"score":0.5,"label":""}
{"page_id":"a","x":30,"y":0,"w":10,"h":10,"score":0.5,"label":""}
{"page_id":"a","x":0,"y":0,"w":10,"h":10,"score":0.7,"label":""}
)",
                                     pages);
    ASSERT_EQ(regions.size(), 4u);
    EXPECT_EQ(regions[0].bbox.x, 0);
    EXPECT_EQ(regions[1].bbox.x, 30);
    EXPECT_EQ(regions[2].bbox.x, 60);
    EXPECT_EQ(regions[3].page_id, "b");
}

TEST(Detections, ErrorsCarryLineAndId)
{
    const std::vector<Page> pages{blank_page("p", 100, 100)};
    EXPECT_NE(error_of([&] { ingest_text("\n{\"page_id\":\"p\",\"x\":0}\n", pages); }).find(":2"),
              std::string::npos);
    EXPECT_NE(error_of([&] { ingest_text("not json\n", pages); }).find(":1"), std::string::npos);
    EXPECT_NE(error_of([&] {
                  ingest_text(R"({"page_id":"zz","x":0,"y":0,"w":10,"h":10,"score":0.5,"label":""})", pages);
              }).find("'zz'"),
              std::string::npos);
    EXPECT_NE(error_of([&] {
                  ingest_text(R"({"page_id":"p","x":0,"y":0,"w":10,"h":10,"score":1e999,"label":""})", pages);
              }).find(":1"),  // overflowing numbers are rejected by the parser
              std::string::npos);
    EXPECT_THROW(ingest_text(R"({"page_id":"p","x":0,"y":0,"w":10,"h":10,"score":1.5,"label":""})", pages), Error);
}

TEST(Grid, FourQuadrants)
{
    ProposerConfig cfg;
    cfg.kind = ProposerKind::grid;
    cfg.grid_cells = {GridCell{50, 50}};
    cfg.grid_stride_fraction = 1.0;
    const auto regions = grid_propose(blank_page("p", 100, 100), cfg);
    ASSERT_EQ(regions.size(), 4u);
    std::vector<BBox> boxes;
    for (const Region& r : regions) {
        boxes.push_back(r.bbox);
        EXPECT_EQ(r.score, 1.0);
        EXPECT_EQ(r.label, "grid");
    }
    std::sort(boxes.begin(), boxes.end());
    EXPECT_EQ(boxes, (std::vector<BBox>{{0, 0, 50, 50}, {0, 50, 50, 50}, {50, 0, 50, 50}, {50, 50, 50, 50}}));
}

TEST(Grid, WholePageCell)
{
    ProposerConfig cfg;
    cfg.kind = ProposerKind::grid;
    cfg.grid_cells = {GridCell{100, 100}};
    const auto regions = grid_propose(blank_page("p", 100, 100), cfg);
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_EQ(regions[0].bbox, (BBox{0, 0, 100, 100}));
}

TEST(Grid, ClosedFormCountOnProfilePage)
{
    ProposerConfig cfg;
    cfg.kind = ProposerKind::grid;
    cfg.grid_cells = {GridCell{64, 64}};
    cfg.grid_stride_fraction = 0.5;
    EXPECT_EQ(grid_propose(blank_page("p", 602, 920), cfg).size(), 17u * 27u);
}

TEST(Grid, CellLargerThanPageIsUsageError)
{
    ProposerConfig cfg;
    cfg.kind = ProposerKind::grid;
    cfg.grid_cells = {GridCell{200, 50}};
    try {
        grid_propose(blank_page("p", 100, 100), cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::usage);
    }
}

TEST(Saliency, UniformPageHasNoRegions)
{
    EXPECT_TRUE(saliency_propose(blank_page("p", 200, 200), ProposerConfig{}).empty());
}

TEST(Saliency, FindsSeparatedGlyphs)
{
    Page page = blank_page("p", 300, 200, 220);
    cv::rectangle(page.image, cv::Rect(20, 30, 60, 40), cv::Scalar(20, 20, 20), cv::FILLED);
    cv::rectangle(page.image, cv::Rect(180, 100, 50, 70), cv::Scalar(40, 90, 160), cv::FILLED);
    const auto regions = saliency_propose(page, ProposerConfig{});
    ASSERT_GE(regions.size(), 2u);
    for (const BBox truth : {BBox{20, 30, 60, 40}, BBox{180, 100, 50, 70}}) {
        double best = 0.0;
        for (const Region& r : regions) {
            best = std::max(best, iou(r.bbox, truth));
        }
        EXPECT_GE(best, 0.5);
    }
}

TEST(Saliency, StepEdgeBoxIsExact)
{
    Page page = blank_page("p", 120, 120, 220);
    cv::rectangle(page.image, cv::Rect(30, 40, 25, 35), cv::Scalar(0, 0, 0), cv::FILLED);
    const auto regions = saliency_propose(page, ProposerConfig{});
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_EQ(regions[0].bbox, (BBox{30, 40, 25, 35}));
}

TEST(Saliency, RecallOnSyntheticCorpus)
{
    const Corpus c = generate_synthetic(SynthParams{20, 8, 4, 602, 920, 21});
    const auto per_page = propose(c.pages, ProposerConfig{}, 2);
    std::size_t found = 0;
    for (const Occurrence& o : c.truth.occurrences) {
        for (std::size_t p = 0; p < c.pages.size(); ++p) {
            if (c.pages[p].page_id != o.page_id) {
                continue;
            }
            for (const Region& r : per_page[p]) {
                if (iou(r.bbox, o.bbox) >= 0.5) {
                    ++found;
                    break;
                }
            }
        }
    }
    EXPECT_GE(static_cast<double>(found) / static_cast<double>(c.truth.occurrences.size()), 0.95);
}

TEST(Proposer, OutputInvariantsAndDeterminism)
{
    const Corpus c = generate_synthetic(SynthParams{6, 5, 3, 400, 500, 2});
    for (ProposerKind kind : {ProposerKind::grid, ProposerKind::saliency}) {
        ProposerConfig cfg;
        cfg.kind = kind;
        cfg.grid_cells = {GridCell{64, 64}, GridCell{96, 48}};
        const auto one = propose(c.pages, cfg, 1);
        const auto many = propose(c.pages, cfg, 4);
        EXPECT_EQ(one, many);
        for (std::size_t p = 0; p < one.size(); ++p) {
            for (std::size_t i = 0; i < one[p].size(); ++i) {
                const Region& r = one[p][i];
                EXPECT_EQ(clip(r.bbox, c.pages[p].width(), c.pages[p].height()), r.bbox);
                EXPECT_GE(r.score, cfg.min_score);
                for (std::size_t j = i + 1; j < one[p].size(); ++j) {
                    EXPECT_LE(iou(r.bbox, one[p][j].bbox), cfg.nms_iou);
                }
            }
        }
    }
}

TEST(Proposer, ConfigValidationAndJson)
{
    ProposerConfig cfg;
    cfg.min_score = 1.5;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.min_score = 0.2;
    cfg.nms_iou = -1;
    EXPECT_THROW(cfg.validate(), Error);
    EXPECT_THROW(proposer_kind_from_string("random"), Error);

    ProposerConfig grid;
    grid.kind = ProposerKind::grid;
    grid.grid_cells = {GridCell{32, 16}};
    const ProposerConfig back = ProposerConfig::from_json(nlohmann::json::parse(grid.to_json().dump()));
    EXPECT_EQ(back.to_json(), grid.to_json());
    EXPECT_EQ(region_id("page7", 12), "page7#12");
}
