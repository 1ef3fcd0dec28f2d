#pragma once

#include <string>
#include <vector>

#include "ropd/rubric/types.hpp"

namespace ropd::rubric {

// System-prompt templates with {slot} markers. The text is fixed; only the
// marked slots (and the m/n cardinality labels) are substituted at render
// time, so slot values survive verbatim in the rendered prompt.
extern const char* const kRubricatorTemplate;
extern const char* const kVerifierTemplate;

std::string render_rubricator_prompt(const std::string& question,
                                     const std::vector<std::string>& teacher_answers,
                                     const std::vector<std::string>& student_rollouts);

std::string render_verifier_prompt(const std::string& question,
                                   const std::string& response, const RubricSet& rubric);

}  // namespace ropd::rubric
