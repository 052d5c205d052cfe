#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace refbert::corpus {

enum class Split { Train, Validation, Test };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);  // throws Error(SchemaViolation)

/// One rename-refactoring example.
struct RefactoringRecord {
  std::string id;
  std::string code_before;
  std::string code_after;
  std::string variable_before;
  std::string variable_after;
  std::string refactoring_type = "RenameVariable";
  Split split = Split::Train;

  friend bool operator==(const RefactoringRecord&, const RefactoringRecord&) = default;
};

using Span = std::pair<std::size_t, std::size_t>;  // [begin, end) byte offsets

struct VariableOccurrence {
  std::string name;
  std::vector<Span> spans;

  friend bool operator==(const VariableOccurrence&, const VariableOccurrence&) = default;
};

/// Local variables and parameters declared in a Java function (or statement
/// fragment), each with every reference span. Ordered by first declaration.
/// Throws Error(MalformedCode) on empty input or unbalanced braces.
std::vector<VariableOccurrence> extract_variables(std::string_view code);

/// Spans where `name` is used as a plain identifier: comments and literals are
/// skipped, as are member selections (`x.name`) and calls (`name(`).
std::vector<Span> find_identifier_spans(std::string_view code, std::string_view name);

/// Replaces every span (sorted, non-overlapping) with `replacement`.
std::string substitute(std::string_view code, const std::vector<Span>& spans, std::string_view replacement);

/// The variable adapt_record would pick for (code, seed).
std::string pick_variable(std::string_view code, std::uint64_t seed);

/// Turns a plain function into a rename record: a seeded pick of the "after"
/// name from the declared variables, and a seeded "before" name drawn from
/// `name_pool`. Pool names equal to the pick, or already used as identifiers
/// in the function, are never drawn. id and split are left for the caller.
RefactoringRecord adapt_record(std::string_view code, std::uint64_t rng_seed,
                               const std::vector<std::string>& name_pool);

/// Throws Error(InvariantViolation) naming the record when any record
/// invariant fails.
void validate_record(const RefactoringRecord& record);

/// Reads a JSONL corpus; every record is validated.
std::vector<RefactoringRecord> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<RefactoringRecord>& records);

std::string record_to_json_line(const RefactoringRecord& record);
RefactoringRecord record_from_json_line(std::string_view line, std::size_t line_number);

/// A plain (not yet adapted) function.
struct SourceFunction {
  std::string id;
  std::string code;
  Split split = Split::Train;
};

/// Reads `{"id","code","split"?}` JSONL.
std::vector<SourceFunction> load_functions(const std::filesystem::path& path);

struct AdaptStats {
  std::size_t input = 0;
  std::size_t too_short = 0;
  std::size_t duplicates = 0;
  std::size_t malformed = 0;
  std::size_t no_variables = 0;
  std::size_t pool_exhausted = 0;
};

std::size_t count_nonblank_lines(std::string_view code);
std::string normalize_whitespace(std::string_view code);

/// Filters functions shorter than three lines and whitespace-normalized
/// duplicates, builds the name pool from one seeded pick per function, then
/// adapts every survivor. Record i uses seed derive_seed(seed, i).
std::vector<RefactoringRecord> adapt_corpus(const std::vector<SourceFunction>& functions, std::uint64_t seed,
                                            AdaptStats* stats = nullptr);

}  // namespace refbert::corpus
