#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace isearch {

enum class Relationship { householder, spouse, natural_child, other };
enum class Sex { male, female };

/// One schema field. Fixed-width files use a 1-based column span
/// (start/width); CSV files use a header column name (defaults to `name`).
/// When a domain is declared, parsed values outside it become missing.
struct FieldSpec {
    std::string name;
    int start = 0;
    int width = 0;
    std::string column;
    std::string role; // canonical role, empty for extra attributes
    std::optional<std::pair<long, long>> domain;
};

/// Numeric codes that give raw values their meaning. These ship in the
/// schema file because code books differ between data vintages.
struct CodeMap {
    long householder = 0;
    long spouse = 1;
    long natural_child = 2;
    long male = 1;
    long female = 2;
    long disability_present = 1;
};

struct RecordSchema {
    enum class Format { fixed_width, csv };
    Format format = Format::fixed_width;

    // Record-kind discriminator: a column span (fixed-width) or a named
    // CSV column, holding one of the two kind tags.
    int kind_start = 1;
    int kind_width = 1;
    std::string kind_column;
    std::string household_kind = "H";
    std::string person_kind = "P";

    std::vector<FieldSpec> household_fields;
    std::vector<FieldSpec> person_fields;
    CodeMap codes;

    static RecordSchema load(const std::string& path);
    static RecordSchema from_json_text(const std::string& text,
                                       const std::string& origin);
    std::string to_json_text() const;
};

/// Attribute values by schema field name; std::nullopt marks a value that
/// was blank or outside its declared domain. Missing is a distinct state,
/// never zero.
using AttrMap = std::map<std::string, std::optional<long>>;

struct HouseholdRecord {
    std::string id;
    std::optional<long> home_ownership;
    std::optional<long> building_type;
    std::optional<long> vehicles;
    std::optional<long> commercial_on_property;
    AttrMap raw;
};

struct PersonRecord {
    std::string household_id;
    std::optional<Relationship> relationship;
    std::optional<Sex> sex;
    std::optional<long> age;
    std::optional<long> marital_status;
    std::optional<long> race;
    std::optional<long> ancestry;
    std::optional<long> education; // 1..16 when present
    std::optional<long> class_of_worker;
    std::optional<long> total_income; // dollars, may be negative
    std::optional<bool> disability;
    AttrMap raw;
};

struct Microdata {
    std::vector<HouseholdRecord> households;
    std::vector<PersonRecord> persons;
};

/// Parses a mixed household/person stream. Errors carry `origin:line`.
/// Household ids must be unique within one parse.
Microdata parse_microdata(std::istream& in, const RecordSchema& schema,
                          const std::string& origin = "<stream>");
Microdata parse_microdata_file(const std::string& path,
                               const RecordSchema& schema);

/// Serializes records back through the schema, each household line followed
/// by its person lines. Persons whose household id has no household record
/// are not written. For fixed-width schemas, parsing a file produced here
/// and writing it again reproduces the bytes.
void write_microdata(std::ostream& out, const RecordSchema& schema,
                     const Microdata& data);

/// A complete family: householder plus spouse of opposite recorded sex,
/// with the couple's natural-born children. Derived, never parsed directly.
struct FamilyUnit {
    HouseholdRecord household;
    PersonRecord father;
    PersonRecord mother;
    std::vector<PersonRecord> children;
};

/// Joins person records to households and keeps only complete families:
/// exactly one householder, exactly one spouse, both sexes recorded and
/// different. Children are the natural-born child records of the household.
/// Non-qualifying households are skipped, not errors.
std::vector<FamilyUnit> derive_families(const Microdata& data);

inline constexpr int kIncomeBinCount = 11;
inline constexpr long kIncomeMin = -10000;
inline constexpr long kIncomeMax = 720000;

/// Bins annual income (dollars) into the 11 standard intervals spanning
/// [-10000, 720000]: half-open [lo, hi) everywhere except the closed top
/// bin. Throws DataError outside the domain.
int income_bin(long income_dollars);
std::string income_bin_label(int bin); // 1-based, e.g. "[4;6)" in 10^4 dollars

inline constexpr int kEducationMinCode = 1;
inline constexpr int kEducationMaxCode = 16;

/// Attainment code <-> label, a bijection over codes 1..16.
std::string education_label(int code);
int education_code(const std::string& label);

}
