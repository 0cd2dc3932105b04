#include "isearch/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "isearch/error.hpp"
#include "isearch/microdata.hpp"

namespace isearch {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Deterministic across platforms: the engine is standardized and the
// distributions are hand-rolled (library distributions are not portable).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    long range(long lo, long hi) {
        return lo + static_cast<long>(eng_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    double normal(double mu, double sigma) {
        double u1 = unit();
        while (u1 <= 0.0) u1 = unit();
        const double u2 = unit();
        return mu + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    long normal_long(double mu, double sigma, long lo, long hi) {
        const long v = std::lround(normal(mu, sigma));
        return std::clamp(v, lo, hi);
    }

    // 0-based index into a weight list (weights need not sum to 1 exactly).
    int pick(std::initializer_list<double> weights) {
        const double r = unit();
        double acc = 0.0;
        int i = 0;
        for (const double w : weights) {
            acc += w;
            if (r < acc) return i;
            ++i;
        }
        return static_cast<int>(weights.size()) - 1;
    }

    bool chance(double p) { return unit() < p; }

private:
    std::mt19937_64 eng_;
};

RecordSchema synth_schema() {
    RecordSchema s;
    s.format = RecordSchema::Format::fixed_width;
    s.kind_start = 1;
    s.kind_width = 1;
    s.household_kind = "H";
    s.person_kind = "P";
    s.codes.householder = 0;
    s.codes.spouse = 1;
    s.codes.natural_child = 2;
    s.codes.male = 1;
    s.codes.female = 2;
    s.codes.disability_present = 1;
    s.household_fields = {
        {"serialno", 2, 7, "", "household_id", std::nullopt},
        {"tenure", 9, 1, "", "home_ownership", std::pair<long, long>{1, 4}},
        {"building", 10, 1, "", "building_type", std::pair<long, long>{1, 4}},
        {"vehicles", 11, 1, "", "vehicles", std::pair<long, long>{0, 6}},
        {"commercial", 12, 1, "", "commercial_on_property", std::pair<long, long>{0, 1}},
    };
    s.person_fields = {
        {"serialno", 2, 7, "", "household_id", std::nullopt},
        {"relate", 9, 1, "", "relationship", std::pair<long, long>{0, 3}},
        {"sex", 10, 1, "", "sex", std::pair<long, long>{1, 2}},
        {"age", 11, 2, "", "age", std::pair<long, long>{0, 99}},
        {"marital", 13, 1, "", "marital_status", std::pair<long, long>{1, 5}},
        {"race", 14, 1, "", "race", std::pair<long, long>{1, 9}},
        {"ancestry", 15, 3, "", "ancestry", std::pair<long, long>{1, 999}},
        {"educ", 18, 2, "", "education", std::pair<long, long>{1, 16}},
        {"cow", 20, 1, "", "class_of_worker", std::pair<long, long>{1, 9}},
        {"income", 21, 7, "", "total_income", std::pair<long, long>{-10000, 720000}},
        {"disab", 28, 1, "", "disability", std::pair<long, long>{1, 2}},
    };
    return s;
}

struct Blob {
    double father_age;
    double mother_age;
    double education;
    double income;
};

// Planted structure: three parent blobs among the families with infants.
constexpr Blob kBlobs[3] = {
    {32.0, 30.0, 12.0, 50000.0},
    {27.0, 26.0, 11.0, 35000.0},
    {36.0, 34.0, 13.0, 67000.0},
};
constexpr double kAgeSigma = 1.3;
constexpr double kEducationSigma = 0.7;
constexpr double kIncomeSigma = 2600.0;

long round100(double v) {
    return std::lround(v / 100.0) * 100;
}

class Generator {
public:
    Generator(const SynthParams& params, const CodeMap& codes)
        : rng_(params.seed), params_(params), codes_(codes) {}

    Microdata run() {
        for (int b = 0; b < 3; ++b)
            for (std::size_t i = 0; i < params_.families_per_blob; ++i)
                blob_family(kBlobs[b]);
        for (std::size_t i = 0; i < params_.childless; ++i) childless_family();
        for (std::size_t i = 0; i < params_.noise; ++i) noise_household(i);
        return std::move(data_);
    }

private:
    std::string next_id() {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%07lu", ++serial_);
        return buf;
    }

    HouseholdRecord& add_household(long tenure, long building, long vehicles,
                                   long commercial) {
        HouseholdRecord h;
        h.id = next_id();
        h.raw["tenure"] = tenure;
        h.raw["building"] = building;
        h.raw["vehicles"] = vehicles;
        h.raw["commercial"] = commercial;
        data_.households.push_back(std::move(h));
        return data_.households.back();
    }

    PersonRecord& add_person(const std::string& hid, long relate, long sex) {
        PersonRecord p;
        p.household_id = hid;
        p.raw["relate"] = relate;
        p.raw["sex"] = sex;
        data_.persons.push_back(std::move(p));
        return data_.persons.back();
    }

    void fill_adult(PersonRecord& p, long age, long educ, long income, long disab) {
        p.raw["age"] = age;
        p.raw["marital"] = 1;
        p.raw["race"] = 1 + rng_.pick({0.70, 0.12, 0.08, 0.06, 0.04});
        p.raw["ancestry"] = rng_.range(1, 999);
        p.raw["educ"] = educ;
        p.raw["cow"] = 1 + rng_.pick({0.60, 0.15, 0.10, 0.10, 0.05});
        p.raw["income"] = income;
        p.raw["disab"] = disab;
    }

    void add_child(const std::string& hid, long age) {
        auto& c = add_person(hid, codes_.natural_child, rng_.range(1, 2));
        c.raw["age"] = age;
        c.raw["marital"] = 5;
    }

    void add_couple(const std::string& hid, long f_age, long m_age, long f_educ,
                    long m_educ, long f_income, long m_income, long f_disab,
                    long m_disab) {
        // The householder's sex alternates so both orientations appear.
        const bool father_is_head = rng_.chance(0.5);
        auto& head = add_person(hid, codes_.householder,
                                father_is_head ? codes_.male : codes_.female);
        fill_adult(head, father_is_head ? f_age : m_age,
                   father_is_head ? f_educ : m_educ,
                   father_is_head ? f_income : m_income,
                   father_is_head ? f_disab : m_disab);
        auto& sp = add_person(hid, codes_.spouse,
                              father_is_head ? codes_.female : codes_.male);
        fill_adult(sp, father_is_head ? m_age : f_age, father_is_head ? m_educ : f_educ,
                   father_is_head ? m_income : f_income,
                   father_is_head ? m_disab : f_disab);
    }

    void blob_family(const Blob& blob) {
        const auto& h = add_household(1 + rng_.pick({0.15, 0.50, 0.30, 0.05}),
                                      1 + rng_.pick({0.45, 0.20, 0.20, 0.15}),
                                      rng_.pick({0.05, 0.35, 0.45, 0.10, 0.05}),
                                      rng_.chance(0.04) ? 1 : 0);
        const long f_age = rng_.normal_long(blob.father_age, kAgeSigma, 18, 60);
        const long m_age = rng_.normal_long(blob.mother_age, kAgeSigma, 18, 60);
        const long f_educ = rng_.normal_long(blob.education, kEducationSigma, 1, 16);
        const long m_educ = rng_.normal_long(blob.education, kEducationSigma, 1, 16);
        const long f_income =
            std::clamp(round100(rng_.normal(blob.income, kIncomeSigma)), -9900l, 719900l);
        const long m_income =
            std::clamp(round100(rng_.normal(18000.0, 9000.0)), -9900l, 719900l);
        add_couple(h.id, f_age, m_age, f_educ, m_educ, f_income, m_income, 2, 2);
        const long children = rng_.chance(0.4) ? 2 : 1;
        for (long c = 0; c < children; ++c) add_child(h.id, rng_.range(0, 2));
    }

    void childless_family() {
        auto& h = add_household(1 + rng_.pick({0.08, 0.27, 0.58, 0.07}),
                                1 + rng_.pick({0.20, 0.15, 0.30, 0.35}),
                                rng_.pick({0.15, 0.45, 0.30, 0.10}),
                                rng_.chance(0.02) ? 1 : 0);
        if (rng_.chance(0.03)) h.raw["tenure"] = std::nullopt; // exercise missing values
        const long f_age = rng_.normal_long(31.0, 4.5, 20, 50);
        const long m_age = rng_.normal_long(29.0, 4.5, 18, 48);
        const long f_educ = rng_.normal_long(11.5, 2.0, 1, 16);
        const long m_educ = rng_.normal_long(11.5, 2.0, 1, 16);
        long f_income = std::clamp(round100(rng_.normal(40000.0, 14000.0)), -9900l, 719900l);
        if (rng_.chance(0.04)) f_income = -round100(static_cast<double>(rng_.range(500, 8000)));
        const long m_income =
            std::clamp(round100(rng_.normal(22000.0, 11000.0)), -9900l, 719900l);
        add_couple(h.id, f_age, m_age, f_educ, m_educ, f_income, m_income, 2, 2);
    }

    // Households the cohort filters must reject: incomplete couples, older
    // or too many children, a disabled parent, an unrecorded sex.
    void noise_household(std::size_t i) {
        const auto& h = add_household(rng_.range(1, 4), rng_.range(1, 4),
                                      rng_.range(0, 3), 0);
        const long f_age = rng_.range(22, 45);
        const long m_age = rng_.range(20, 43);
        const long educ = rng_.range(9, 16);
        const long income = round100(static_cast<double>(rng_.range(5000, 90000)));
        switch (i % 5) {
        case 0: { // lone householder
            auto& p = add_person(h.id, codes_.householder, rng_.range(1, 2));
            fill_adult(p, rng_.range(25, 70), educ, income, 2);
            break;
        }
        case 1: { // school-age child
            add_couple(h.id, f_age, m_age, educ, educ, income, income / 2, 2, 2);
            add_child(h.id, rng_.range(3, 17));
            break;
        }
        case 2: { // disabled father
            add_couple(h.id, f_age, m_age, educ, educ, income, income / 2, 1, 2);
            for (long c = 0, n = rng_.range(1, 2); c < n; ++c)
                add_child(h.id, rng_.range(0, 2));
            break;
        }
        case 3: { // too many infants
            add_couple(h.id, f_age, m_age, educ, educ, income, income / 2, 2, 2);
            for (int c = 0; c < 3; ++c) add_child(h.id, rng_.range(0, 2));
            break;
        }
        default: { // spouse without a recorded sex
            auto& head = add_person(h.id, codes_.householder, codes_.male);
            fill_adult(head, f_age, educ, income, 2);
            auto& sp = add_person(h.id, codes_.spouse, 0);
            sp.raw["sex"] = std::nullopt;
            fill_adult(sp, m_age, educ, income / 2, 2);
            add_child(h.id, rng_.range(0, 2));
            break;
        }
        }
    }

    Rng rng_;
    SynthParams params_;
    CodeMap codes_;
    Microdata data_;
    unsigned long serial_ = 0;
};

nlohmann::json synth_config(const SynthParams& params) {
    const std::size_t threshold =
        std::max<std::size_t>(3, params.families_per_blob / 6);
    nlohmann::json j;
    j["inputs"] = {"microdata.dat"};
    j["schema"] = "schema.json";
    j["cohort"] = {
        {"feature", {{"kind", "children_count"}, {"min", 1}, {"max", 2}}},
        {"restrictions",
         nlohmann::json::array({
             {{"kind", "children_count"}, {"min", 0}, {"max", 2}},
             {{"kind", "child_ages"}, {"min", 0}, {"max", 2}},
             {{"kind", "no_disability"}},
         })},
        {"age_window", {{"threshold", threshold}}},
    };
    j["clustering"] = {
        {"features", {"father_age", "mother_age", "father_education",
                      "mother_education", "father_income"}},
        {"radius", 0.5},
    };
    j["ranges"] = {{"attributes", {"father_age", "mother_age"}}, {"fraction", 0.8}};
    j["comparisons"] = nlohmann::json::array({
        {{"attribute", "father_income"}, {"binning", "income"}},
        {{"attribute", "father_education"}, {"binning", {{"codes", {1, 16}}}}},
        {{"attribute", "mother_education"}, {"binning", {{"codes", {1, 16}}}}},
        {{"attribute", "home_ownership"}, {"binning", {{"codes", {1, 4}}}}},
        {{"attribute", "building_type"}, {"binning", {{"codes", {1, 4}}}}},
    });
    j["divergence_threshold"] = 0.1;
    j["output_dir"] = "report";
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    out.close();
    if (!out) throw DataError("failed writing " + path.string());
}

}

SynthOutput write_synth_dataset(const std::filesystem::path& dir,
                                const SynthParams& params) {
    std::filesystem::create_directories(dir);
    const RecordSchema schema = synth_schema();
    Generator gen(params, schema.codes);
    const Microdata data = gen.run();

    SynthOutput out;
    out.microdata = dir / "microdata.dat";
    out.schema = dir / "schema.json";
    out.config = dir / "config.json";

    std::ofstream md(out.microdata, std::ios::binary);
    if (!md) throw DataError("cannot write " + out.microdata.string());
    write_microdata(md, schema, data);
    md.close();
    if (!md) throw DataError("failed writing " + out.microdata.string());

    write_text(out.schema, schema.to_json_text());
    write_text(out.config, synth_config(params).dump(2) + "\n");
    return out;
}

}
