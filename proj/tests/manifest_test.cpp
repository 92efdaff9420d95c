#include "afif4/manifest.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

using namespace afif4;

namespace {

DatasetManifest parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest_stream(in, "test");
}

std::string landmark_fields(double base) {
    std::string out;
    for (int i = 0; i < kLandmarkCount; ++i)
        out += "\t" + std::to_string(base + i) + "\t" + std::to_string(base + i + 0.5);
    return out;
}

}  // namespace

TEST(ParseManifest, EmptyFileYieldsNoRecords) {
    EXPECT_TRUE(parse_text("").records.empty());
    EXPECT_TRUE(parse_text("# only comments\n\n").records.empty());
}

TEST(ParseManifest, SingleLineMatchesFields) {
    const DatasetManifest mf = parse_text("imgs/a.pgm\tM\tsubj1\t3\n");
    ASSERT_EQ(mf.records.size(), 1u);
    const SampleRecord& r = mf.records[0];
    EXPECT_EQ(r.image_path, "imgs/a.pgm");
    EXPECT_EQ(r.gender, kMale);
    EXPECT_EQ(r.subject_id, "subj1");
    EXPECT_EQ(r.fold, 3);
    EXPECT_FALSE(r.landmarks.has_value());
}

TEST(ParseManifest, LandmarksParsedWhenPresent) {
    const DatasetManifest mf = parse_text("a.pgm\tF\ts\t-" + landmark_fields(4.0) + "\n");
    ASSERT_EQ(mf.records.size(), 1u);
    ASSERT_TRUE(mf.records[0].landmarks.has_value());
    EXPECT_EQ(mf.records[0].fold, -1);
    EXPECT_EQ(mf.records[0].gender, kFemale);
    EXPECT_DOUBLE_EQ(mf.records[0].landmarks->points[0].x, 4.0);
    EXPECT_DOUBLE_EQ(mf.records[0].landmarks->points[16].y, 20.5);
}

TEST(ParseManifest, SixteenPointLineIsRejectedWithLineNumber) {
    std::string line = "a.pgm\tM\ts\t0";
    for (int i = 0; i < 16; ++i) line += "\t1\t2";  // one pair short
    try {
        parse_text("# header\n" + line + "\n");
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(ParseManifest, DuplicatePathRejected) {
    EXPECT_THROW(parse_text("a.pgm\tM\ts1\t0\na.pgm\tF\ts2\t1\n"), Error);
}

TEST(ParseManifest, InvalidGenderTokenRejected) {
    try {
        parse_text("a.pgm\tX\ts\t0\n");
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("gender"), std::string::npos) << e.what();
    }
}

TEST(ParseManifest, BadFoldRejected) {
    EXPECT_THROW(parse_text("a.pgm\tM\ts\t-2\n"), Error);
    EXPECT_THROW(parse_text("a.pgm\tM\ts\t1.5\n"), Error);
    EXPECT_THROW(parse_text("a.pgm\tM\ts\tx\n"), Error);
}

TEST(ParseManifest, CrLfTolerated) {
    const DatasetManifest mf = parse_text("a.pgm\tM\ts\t0\r\n");
    ASSERT_EQ(mf.records.size(), 1u);
    EXPECT_EQ(mf.records[0].fold, 0);
}

TEST(ParseManifest, ParsingIsTotal) {
    // every input either parses or raises a located Error; nothing else
    std::mt19937_64 rng(99);
    const std::string alphabet = "abM F\t-0123.\n#x";
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const int len = static_cast<int>(rng() % 60);
        for (int i = 0; i < len; ++i) text += alphabet[rng() % alphabet.size()];
        try {
            parse_text(text);
        } catch (const Error& e) {
            EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
        }
    }
}

TEST(ParseManifest, WriteParseRoundTrip) {
    DatasetManifest mf;
    mf.name = "rt";
    SampleRecord a;
    a.image_path = "x/a.pgm";
    a.gender = kMale;
    a.subject_id = "s1";
    a.fold = 2;
    SampleRecord b;
    b.image_path = "x/b.pgm";
    b.gender = kFemale;
    b.subject_id = "s2";
    b.fold = -1;
    LandmarkSet lm;
    for (int i = 0; i < kLandmarkCount; ++i) lm.points[i] = Point{i * 1.25, i * 2.5};
    b.landmarks = lm;
    mf.records = {a, b};

    std::ostringstream out;
    write_manifest(mf, out);
    const DatasetManifest back = parse_text(out.str());
    ASSERT_EQ(back.records.size(), 2u);
    EXPECT_EQ(back.records[0].image_path, "x/a.pgm");
    EXPECT_EQ(back.records[0].fold, 2);
    EXPECT_EQ(back.records[1].gender, kFemale);
    ASSERT_TRUE(back.records[1].landmarks.has_value());
    for (int i = 0; i < kLandmarkCount; ++i) {
        EXPECT_DOUBLE_EQ(back.records[1].landmarks->points[i].x, i * 1.25);
        EXPECT_DOUBLE_EQ(back.records[1].landmarks->points[i].y, i * 2.5);
    }
}

TEST(Landmarks, GroupsPartitionTheSeventeenPoints) {
    std::array<int, kLandmarkCount> hits{};
    for (FeatureGroup g : {FeatureGroup::LeftEye, FeatureGroup::RightEye, FeatureGroup::Nose,
                           FeatureGroup::Mouth, FeatureGroup::FaceOutline}) {
        EXPECT_FALSE(group_indices(g).empty());
        for (int i : group_indices(g)) ++hits[i];
    }
    for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Landmarks, GroupBoxIsTight) {
    LandmarkSet lm;
    for (int i = 0; i < kLandmarkCount; ++i) lm.points[i] = Point{10.0, 10.0};
    lm.points[0] = Point{2.0, 3.0};
    lm.points[1] = Point{8.0, 5.0};
    lm.points[2] = Point{5.0, 4.0};
    const Rect box = lm.group_box(FeatureGroup::LeftEye);
    EXPECT_DOUBLE_EQ(box.x, 2.0);
    EXPECT_DOUBLE_EQ(box.y, 3.0);
    EXPECT_DOUBLE_EQ(box.w, 6.0);
    EXPECT_DOUBLE_EQ(box.h, 2.0);
}
