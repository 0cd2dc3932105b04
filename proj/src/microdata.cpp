#include "isearch/microdata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "isearch/error.hpp"
#include "isearch/table.hpp"

namespace isearch {

using nlohmann::json;

namespace {

constexpr long kIncomeEdges[kIncomeBinCount + 1] = {
    -10000, 0,      10000,  20000,  40000,  60000,
    80000,  100000, 200000, 300000, 400000, 720000,
};

const char* kIncomeLabels[kIncomeBinCount] = {
    "[-1;0)",  "[0;1)",   "[1;2)",   "[2;4)",   "[4;6)",  "[6;8)",
    "[8;10)",  "[10;20)", "[20;30)", "[30;40)", "[40;72]",
};

const char* kEducationLabels[kEducationMaxCode] = {
    "No schooling completed",
    "Nursery school to 4th grade",
    "5th grade or 6th grade",
    "7th grade or 8th grade",
    "9th grade",
    "10th grade",
    "11th grade",
    "12th grade, no diploma",
    "High school graduate",
    "Some college, but less than 1 year",
    "One or more years of college, no degree",
    "Associate degree",
    "Bachelor's degree",
    "Master's degree",
    "Professional degree",
    "Doctorate degree",
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

const char* kHouseholdRoles[] = {"household_id", "home_ownership", "building_type",
                                 "vehicles", "commercial_on_property"};
const char* kPersonRoles[] = {"household_id", "relationship", "sex",
                              "age", "marital_status", "race",
                              "ancestry", "education", "class_of_worker",
                              "total_income", "disability"};

bool contains(const char* const* begin, const char* const* end, const std::string& role) {
    return std::find_if(begin, end, [&](const char* r) { return role == r; }) != end;
}

void validate_fields(const std::vector<FieldSpec>& fields, bool household,
                     RecordSchema::Format format, int kind_start, int kind_width,
                     const std::string& origin) {
    std::unordered_set<std::string> names;
    bool has_id = false;
    struct Span { int start, end; std::string name; };
    std::vector<Span> spans;
    if (format == RecordSchema::Format::fixed_width)
        spans.push_back({kind_start, kind_start + kind_width, "record kind"});

    for (const auto& f : fields) {
        if (f.name.empty())
            throw ConfigError(origin + ": field without a name");
        if (!names.insert(f.name).second)
            throw ConfigError(origin + ": duplicate field name '" + f.name + "'");
        if (!f.role.empty()) {
            const bool known = household
                ? contains(std::begin(kHouseholdRoles), std::end(kHouseholdRoles), f.role)
                : contains(std::begin(kPersonRoles), std::end(kPersonRoles), f.role);
            if (!known)
                throw ConfigError(origin + ": field '" + f.name + "' has unknown role '" +
                                  f.role + "'");
            if (f.role == "household_id") has_id = true;
        }
        if (format == RecordSchema::Format::fixed_width) {
            if (f.start < 1 || f.width < 1)
                throw ConfigError(origin + ": field '" + f.name +
                                  "' needs a 1-based start and a positive width");
            spans.push_back({f.start, f.start + f.width, f.name});
        }
    }
    if (!has_id)
        throw ConfigError(origin + ": schema lacks a household_id field for the " +
                          (household ? std::string("household") : std::string("person")) +
                          " record");
    std::sort(spans.begin(), spans.end(),
              [](const Span& a, const Span& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < spans.size(); ++i)
        if (spans[i].start < spans[i - 1].end)
            throw ConfigError(origin + ": fields '" + spans[i - 1].name + "' and '" +
                              spans[i].name + "' overlap");
}

std::vector<FieldSpec> fields_from_json(const json& j, const std::string& origin) {
    std::vector<FieldSpec> out;
    for (const auto& fj : j.at("fields")) {
        FieldSpec f;
        f.name = fj.at("name").get<std::string>();
        f.start = fj.value("start", 0);
        f.width = fj.value("width", 0);
        f.column = fj.value("column", f.name);
        f.role = fj.value("role", std::string());
        if (fj.contains("domain")) {
            const auto& d = fj.at("domain");
            if (!d.is_array() || d.size() != 2)
                throw ConfigError(origin + ": field '" + f.name +
                                  "': domain must be a [min, max] pair");
            f.domain = {d[0].get<long>(), d[1].get<long>()};
        }
        out.push_back(std::move(f));
    }
    return out;
}

json fields_to_json(const std::vector<FieldSpec>& fields, RecordSchema::Format format) {
    json out = json::array();
    for (const auto& f : fields) {
        json fj;
        fj["name"] = f.name;
        if (format == RecordSchema::Format::fixed_width) {
            fj["start"] = f.start;
            fj["width"] = f.width;
        } else if (f.column != f.name) {
            fj["column"] = f.column;
        }
        if (!f.role.empty()) fj["role"] = f.role;
        if (f.domain) fj["domain"] = {f.domain->first, f.domain->second};
        out.push_back(std::move(fj));
    }
    return out;
}

}

RecordSchema RecordSchema::from_json_text(const std::string& text,
                                          const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    try {
        RecordSchema s;
        const auto format = j.at("format").get<std::string>();
        if (format == "fixed")
            s.format = Format::fixed_width;
        else if (format == "csv")
            s.format = Format::csv;
        else
            throw ConfigError(origin + ": format must be 'fixed' or 'csv'");

        const auto& kind = j.at("kind");
        s.household_kind = kind.at("household").get<std::string>();
        s.person_kind = kind.at("person").get<std::string>();
        if (s.household_kind == s.person_kind)
            throw ConfigError(origin + ": household and person kind tags must differ");
        if (s.format == Format::fixed_width) {
            s.kind_start = kind.at("start").get<int>();
            s.kind_width = kind.at("width").get<int>();
            if (s.kind_start < 1 || s.kind_width < 1)
                throw ConfigError(origin + ": kind span needs a 1-based start and a positive width");
        } else {
            s.kind_column = kind.at("column").get<std::string>();
        }

        if (j.contains("codes")) {
            const auto& c = j.at("codes");
            if (c.contains("relationship")) {
                const auto& r = c.at("relationship");
                s.codes.householder = r.at("householder").get<long>();
                s.codes.spouse = r.at("spouse").get<long>();
                s.codes.natural_child = r.at("natural_child").get<long>();
            }
            if (c.contains("sex")) {
                s.codes.male = c.at("sex").at("male").get<long>();
                s.codes.female = c.at("sex").at("female").get<long>();
            }
            if (c.contains("disability"))
                s.codes.disability_present = c.at("disability").at("present").get<long>();
        }

        s.household_fields = fields_from_json(j.at("household"), origin);
        s.person_fields = fields_from_json(j.at("person"), origin);
        validate_fields(s.household_fields, true, s.format, s.kind_start, s.kind_width, origin);
        validate_fields(s.person_fields, false, s.format, s.kind_start, s.kind_width, origin);
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

RecordSchema RecordSchema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path);
}

std::string RecordSchema::to_json_text() const {
    json j;
    j["format"] = format == Format::fixed_width ? "fixed" : "csv";
    json kind;
    if (format == Format::fixed_width) {
        kind["start"] = kind_start;
        kind["width"] = kind_width;
    } else {
        kind["column"] = kind_column;
    }
    kind["household"] = household_kind;
    kind["person"] = person_kind;
    j["kind"] = std::move(kind);
    j["codes"] = {
        {"relationship",
         {{"householder", codes.householder},
          {"spouse", codes.spouse},
          {"natural_child", codes.natural_child}}},
        {"sex", {{"male", codes.male}, {"female", codes.female}}},
        {"disability", {{"present", codes.disability_present}}},
    };
    j["household"] = {{"fields", fields_to_json(household_fields, format)}};
    j["person"] = {{"fields", fields_to_json(person_fields, format)}};
    return j.dump(2) + "\n";
}

namespace {

struct LinePos {
    const std::string& origin;
    std::size_t line;
    std::string str() const { return origin + ":" + std::to_string(line); }
};

// Blank text is missing; values outside the declared domain (or outside the
// role-implied one: education 1..16, age >= 0) are missing as well. Anything
// non-numeric is a positioned error.
std::optional<long> field_value(std::string_view text, const FieldSpec& f,
                                const LinePos& pos) {
    const auto cell = trim(text);
    if (cell.empty()) return std::nullopt;
    long v = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw DataError(pos.str() + ": field '" + f.name + "' is not numeric: '" +
                        std::string(cell) + "'");
    if (f.domain && (v < f.domain->first || v > f.domain->second)) return std::nullopt;
    if (f.role == "education" && (v < kEducationMinCode || v > kEducationMaxCode))
        return std::nullopt;
    if (f.role == "age" && v < 0) return std::nullopt;
    return v;
}

void apply_household_field(HouseholdRecord& h, const FieldSpec& f,
                           std::string_view text, const LinePos& pos) {
    if (f.role == "household_id") {
        const auto id = trim(text);
        if (id.empty()) throw DataError(pos.str() + ": household record without an id");
        h.id = std::string(id);
        return;
    }
    const auto v = field_value(text, f, pos);
    h.raw[f.name] = v;
    if (f.role == "home_ownership") h.home_ownership = v;
    else if (f.role == "building_type") h.building_type = v;
    else if (f.role == "vehicles") h.vehicles = v;
    else if (f.role == "commercial_on_property") h.commercial_on_property = v;
}

void apply_person_field(PersonRecord& p, const FieldSpec& f, std::string_view text,
                        const CodeMap& codes, const LinePos& pos) {
    if (f.role == "household_id") {
        const auto id = trim(text);
        if (id.empty()) throw DataError(pos.str() + ": person record without a household id");
        p.household_id = std::string(id);
        return;
    }
    const auto v = field_value(text, f, pos);
    p.raw[f.name] = v;
    if (f.role == "relationship") {
        if (v) {
            if (*v == codes.householder) p.relationship = Relationship::householder;
            else if (*v == codes.spouse) p.relationship = Relationship::spouse;
            else if (*v == codes.natural_child) p.relationship = Relationship::natural_child;
            else p.relationship = Relationship::other;
        }
    } else if (f.role == "sex") {
        if (v) {
            if (*v == codes.male) p.sex = Sex::male;
            else if (*v == codes.female) p.sex = Sex::female;
            // any other code stays unrecorded
        }
    } else if (f.role == "disability") {
        if (v) p.disability = (*v == codes.disability_present);
    } else if (f.role == "age") p.age = v;
    else if (f.role == "marital_status") p.marital_status = v;
    else if (f.role == "race") p.race = v;
    else if (f.role == "ancestry") p.ancestry = v;
    else if (f.role == "education") p.education = v;
    else if (f.role == "class_of_worker") p.class_of_worker = v;
    else if (f.role == "total_income") p.total_income = v;
}

std::size_t fixed_required_width(const std::vector<FieldSpec>& fields,
                                 int kind_start, int kind_width) {
    std::size_t need = static_cast<std::size_t>(kind_start - 1 + kind_width);
    for (const auto& f : fields)
        need = std::max(need, static_cast<std::size_t>(f.start - 1 + f.width));
    return need;
}

// Lazily resolved CSV column positions for one record kind.
struct CsvKindColumns {
    bool resolved = false;
    std::vector<std::size_t> index;
};

void resolve_csv_columns(CsvKindColumns& cols, const std::vector<FieldSpec>& fields,
                         const std::vector<std::string>& header,
                         const std::string& origin) {
    if (cols.resolved) return;
    cols.index.reserve(fields.size());
    for (const auto& f : fields) {
        const auto it = std::find(header.begin(), header.end(), f.column);
        if (it == header.end())
            throw DataError(origin + ": header lacks column '" + f.column + "'");
        cols.index.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    cols.resolved = true;
}

}

Microdata parse_microdata(std::istream& in, const RecordSchema& schema,
                          const std::string& origin) {
    Microdata data;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;

    auto note_household = [&](HouseholdRecord&& h, const LinePos& pos) {
        if (!seen_ids.insert(h.id).second)
            throw DataError(pos.str() + ": duplicate household id '" + h.id + "'");
        data.households.push_back(std::move(h));
    };

    if (schema.format == RecordSchema::Format::fixed_width) {
        const std::size_t need_h = fixed_required_width(schema.household_fields,
                                                        schema.kind_start, schema.kind_width);
        const std::size_t need_p = fixed_required_width(schema.person_fields,
                                                        schema.kind_start, schema.kind_width);
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            const LinePos pos{origin, line_no};
            const std::size_t kind_end =
                static_cast<std::size_t>(schema.kind_start - 1 + schema.kind_width);
            if (line.size() < kind_end)
                throw DataError(pos.str() + ": line too short for the record kind field");
            const std::string kind(trim(std::string_view(line).substr(
                static_cast<std::size_t>(schema.kind_start - 1),
                static_cast<std::size_t>(schema.kind_width))));
            const bool is_household = kind == schema.household_kind;
            if (!is_household && kind != schema.person_kind)
                throw DataError(pos.str() + ": unknown record kind '" + kind + "'");
            const std::size_t need = is_household ? need_h : need_p;
            if (line.size() < need)
                throw DataError(pos.str() + ": line has " + std::to_string(line.size()) +
                                " characters, schema needs " + std::to_string(need));
            auto span = [&](const FieldSpec& f) {
                return std::string_view(line).substr(static_cast<std::size_t>(f.start - 1),
                                                     static_cast<std::size_t>(f.width));
            };
            if (is_household) {
                HouseholdRecord h;
                for (const auto& f : schema.household_fields)
                    apply_household_field(h, f, span(f), pos);
                note_household(std::move(h), pos);
            } else {
                PersonRecord p;
                for (const auto& f : schema.person_fields)
                    apply_person_field(p, f, span(f), schema.codes, pos);
                data.persons.push_back(std::move(p));
            }
        }
        return data;
    }

    // CSV: header row first; record kinds share the file, discriminated by
    // the kind column. A kind's columns are resolved when its first row
    // appears, so single-kind files only need their own columns.
    if (!std::getline(in, line)) return data;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    for (auto& c : split_line(line, ','))
        header.push_back(std::string(trim(c)));
    const auto kind_it = std::find(header.begin(), header.end(), schema.kind_column);
    if (kind_it == header.end())
        throw DataError(origin + ": header lacks the record kind column '" +
                        schema.kind_column + "'");
    const std::size_t kind_col = static_cast<std::size_t>(kind_it - header.begin());

    CsvKindColumns hcols, pcols;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const LinePos pos{origin, line_no};
        const auto cells = split_line(line, ',');
        if (cells.size() != header.size())
            throw DataError(pos.str() + ": expected " + std::to_string(header.size()) +
                            " columns, got " + std::to_string(cells.size()));
        const std::string kind(trim(cells[kind_col]));
        if (kind == schema.household_kind) {
            resolve_csv_columns(hcols, schema.household_fields, header, origin);
            HouseholdRecord h;
            for (std::size_t k = 0; k < schema.household_fields.size(); ++k)
                apply_household_field(h, schema.household_fields[k],
                                      cells[hcols.index[k]], pos);
            note_household(std::move(h), pos);
        } else if (kind == schema.person_kind) {
            resolve_csv_columns(pcols, schema.person_fields, header, origin);
            PersonRecord p;
            for (std::size_t k = 0; k < schema.person_fields.size(); ++k)
                apply_person_field(p, schema.person_fields[k],
                                   cells[pcols.index[k]], schema.codes, pos);
            data.persons.push_back(std::move(p));
        } else {
            throw DataError(pos.str() + ": unknown record kind '" + kind + "'");
        }
    }
    return data;
}

Microdata parse_microdata_file(const std::string& path, const RecordSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);
    return parse_microdata(in, schema, path);
}

namespace {

std::string field_text(const std::optional<long>& v) {
    return v ? std::to_string(*v) : std::string();
}

void place_fixed(std::string& line, int start, int width, const std::string& text,
                 const std::string& field_name) {
    if (text.size() > static_cast<std::size_t>(width))
        throw DataError("value '" + text + "' does not fit field '" + field_name +
                        "' of width " + std::to_string(width));
    // right-aligned, space-padded
    const std::size_t at = static_cast<std::size_t>(start - 1 + width) - text.size();
    line.replace(at, text.size(), text);
}

std::string household_field_text(const HouseholdRecord& h, const FieldSpec& f) {
    if (f.role == "household_id") return h.id;
    const auto it = h.raw.find(f.name);
    return field_text(it == h.raw.end() ? std::nullopt : it->second);
}

std::string person_field_text(const PersonRecord& p, const FieldSpec& f) {
    if (f.role == "household_id") return p.household_id;
    const auto it = p.raw.find(f.name);
    return field_text(it == p.raw.end() ? std::nullopt : it->second);
}

}

void write_microdata(std::ostream& out, const RecordSchema& schema,
                     const Microdata& data) {
    std::unordered_map<std::string, std::vector<const PersonRecord*>> by_household;
    for (const auto& p : data.persons) by_household[p.household_id].push_back(&p);

    if (schema.format == RecordSchema::Format::fixed_width) {
        const std::size_t w_h = fixed_required_width(schema.household_fields,
                                                     schema.kind_start, schema.kind_width);
        const std::size_t w_p = fixed_required_width(schema.person_fields,
                                                     schema.kind_start, schema.kind_width);
        for (const auto& h : data.households) {
            std::string line(w_h, ' ');
            place_fixed(line, schema.kind_start, schema.kind_width, schema.household_kind,
                        "record kind");
            for (const auto& f : schema.household_fields)
                place_fixed(line, f.start, f.width, household_field_text(h, f), f.name);
            out << line << '\n';
            const auto it = by_household.find(h.id);
            if (it == by_household.end()) continue;
            for (const auto* p : it->second) {
                std::string pl(w_p, ' ');
                place_fixed(pl, schema.kind_start, schema.kind_width, schema.person_kind,
                            "record kind");
                for (const auto& f : schema.person_fields)
                    place_fixed(pl, f.start, f.width, person_field_text(*p, f), f.name);
                out << pl << '\n';
            }
        }
        return;
    }

    // CSV: one header holding the kind column plus the union of both kinds'
    // columns; cells outside a record's own kind stay blank.
    std::vector<std::string> header{schema.kind_column};
    auto add_col = [&](const std::string& c) {
        if (std::find(header.begin(), header.end(), c) == header.end())
            header.push_back(c);
    };
    for (const auto& f : schema.household_fields) add_col(f.column);
    for (const auto& f : schema.person_fields) add_col(f.column);
    auto col_of = [&](const std::string& c) {
        return static_cast<std::size_t>(
            std::find(header.begin(), header.end(), c) - header.begin());
    };
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    emit(header);
    for (const auto& h : data.households) {
        std::vector<std::string> cells(header.size());
        cells[0] = schema.household_kind;
        for (const auto& f : schema.household_fields)
            cells[col_of(f.column)] = household_field_text(h, f);
        emit(cells);
        const auto it = by_household.find(h.id);
        if (it == by_household.end()) continue;
        for (const auto* p : it->second) {
            std::vector<std::string> pc(header.size());
            pc[0] = schema.person_kind;
            for (const auto& f : schema.person_fields)
                pc[col_of(f.column)] = person_field_text(*p, f);
            emit(pc);
        }
    }
}

std::vector<FamilyUnit> derive_families(const Microdata& data) {
    std::unordered_map<std::string, std::vector<const PersonRecord*>> by_household;
    for (const auto& p : data.persons) by_household[p.household_id].push_back(&p);

    std::vector<FamilyUnit> out;
    for (const auto& h : data.households) {
        const auto it = by_household.find(h.id);
        if (it == by_household.end()) continue;
        const PersonRecord* head = nullptr;
        const PersonRecord* partner = nullptr;
        bool malformed = false;
        std::vector<const PersonRecord*> kids;
        for (const auto* p : it->second) {
            if (!p->relationship) continue;
            switch (*p->relationship) {
            case Relationship::householder:
                if (head) malformed = true;
                head = p;
                break;
            case Relationship::spouse:
                if (partner) malformed = true;
                partner = p;
                break;
            case Relationship::natural_child:
                kids.push_back(p);
                break;
            case Relationship::other:
                break;
            }
        }
        // Complete families only: one householder, one spouse, opposite
        // recorded sexes so the parents are identifiable.
        if (malformed || !head || !partner) continue;
        if (!head->sex || !partner->sex || *head->sex == *partner->sex) continue;

        FamilyUnit fam;
        fam.household = h;
        if (*head->sex == Sex::male) {
            fam.father = *head;
            fam.mother = *partner;
        } else {
            fam.father = *partner;
            fam.mother = *head;
        }
        fam.children.reserve(kids.size());
        for (const auto* k : kids) fam.children.push_back(*k);
        out.push_back(std::move(fam));
    }
    return out;
}

int income_bin(long income_dollars) {
    if (income_dollars < kIncomeMin || income_dollars > kIncomeMax)
        throw DataError("income " + std::to_string(income_dollars) +
                        " outside the binnable range [" + std::to_string(kIncomeMin) +
                        ", " + std::to_string(kIncomeMax) + "]");
    for (int b = 1; b <= kIncomeBinCount - 1; ++b)
        if (income_dollars < kIncomeEdges[b]) return b;
    return kIncomeBinCount; // closed top bin
}

std::string income_bin_label(int bin) {
    if (bin < 1 || bin > kIncomeBinCount)
        throw DataError("income bin out of range: " + std::to_string(bin));
    return kIncomeLabels[bin - 1];
}

std::string education_label(int code) {
    if (code < kEducationMinCode || code > kEducationMaxCode)
        throw DataError("education code out of range: " + std::to_string(code));
    return kEducationLabels[code - 1];
}

int education_code(const std::string& label) {
    for (int c = kEducationMinCode; c <= kEducationMaxCode; ++c)
        if (label == kEducationLabels[c - 1]) return c;
    throw DataError("unknown education label: '" + label + "'");
}

}
