#include "ropd/rubric/templates.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

#include "ropd/error.hpp"

namespace ropd::rubric {

const char* const kRubricatorTemplate =
    R"TPL(You are an expert in educational assessment and contrastive rubric design.
Your task is to analyze a question together with two sets of responses:
- A set of TEACHER responses (multiple reference answers from strong models;
  each may contain errors or use different approaches, but collectively
  represent high-quality answer behavior).
- A set of STUDENT responses (multiple rollouts from a weaker model currently
  under training; these are on-policy samples that need actionable improvement
  signals).

Your goal is to generate a SINGLE shared rubric that applies to ALL student
responses for this question.

# Input Data
[Question]: {question}

[Teacher Responses] (m answers):
[1]: {teacher_response_1}
...
[m]: {teacher_response_m}

[Student Responses] (n rollouts):
[1]: {student_response_1}
...
[n]: {student_response_n}

# Core Objective
Generate ONE shared rubric with K criteria. The rubric should:
- Capture quality dimensions where teacher responses show strong, consistent
  performance.
- Target dimensions where student responses exhibit systematic weaknesses.
- Help move the student policy toward the answer-quality level of the teacher
  distribution.
- Be applicable to any single student response independently at verification
  time.

Important constraints:
- Do NOT reward copying a specific teacher's wording, surface style, or exact
  method.
- Do NOT assume any single teacher response is fully correct.
- Do NOT define criteria that require matching a specific teacher's final
  answer.
- Do NOT define criteria that can only be judged by comparing against a teacher
  response at verification time.
- Each criterion must be evaluable on a single response on its own.

# Multi-Teacher Design Rules
- When multiple teachers agree on a quality dimension, that dimension deserves
  higher weight.
- When teachers disagree on an approach, a criterion should accept ANY valid
  approach, not penalize deviation from the majority.
- Rubrics should not collapse into "the student should be more like Teacher
  \#3" --- they must remain response-level quality criteria.

# Hard Requirements
Each criterion must be:
1. Specific and Measurable: Clearly define a concrete answer-quality merit.
2. Binary Evaluable: A verifier should be able to mark it True or False for one
   response alone.
3. Instructionally Useful: It should point to a meaningful improvement
   direction for the students.
4. Alternative-Method Safe: A different valid approach that exhibits the same
   merit should still be rewarded.
5. Distinguishing: Prefer merits that teachers consistently show and students
   systematically lack.
6. Black-Box Compatible: Prefer criteria that evaluate observable answer
   behavior and response quality.

# Required Category Taxonomy
Your rubric should be guided by the following three categories. Use the
`category` field to assign each criterion to exactly one category.

1. Task Completion
   Whether the response completes the task and produces the required final
   answer in the correct form. This includes identifying the target quantity,
   presenting the answer explicitly, and meeting format requirements.

2. Observable Quality
   Whether the response demonstrates strong observable correctness signals
   under black-box evaluation. This includes correct intermediate steps,
   valid factorization or algebraic manipulation, identification of key
   constraints (\textit{e.g.}, parity obstructions), and absence of hallucinated
   claims or guessed answers.

3. General Reasoning
   Broad reasoning qualities such as logical coherence, step-by-step
   derivation flow, planning structure, self-checking behavior, clarity,
   and focus. Use this category when such qualities are genuinely relevant
   and improve teacher-student separation.

# Category Priorities
1. Preserve general validity of the rubric for the question.
2. Prioritize Task Completion by default---at least one high-weight criterion
   should verify that the response answers the requested target and presents
   it in the required form.
3. Prioritize Observable Quality criteria that directly check correctness of
   intermediate steps, mathematical manipulations, and domain-specific
   reasoning (\textit{e.g.}, factorization, constraint identification).
4. Use General Reasoning when genuinely relevant and it improves
   teacher-student separation, but avoid rewarding superficial stylistic
   performance.
5. Make the rubric produce actionable learning-direction signals for the
   student.

Most of the total points should come from criteria that are likely satisfied
by most teacher responses but not by most student responses.

# Additional Design Rules
- At least one high-value criterion should check whether the response answers
  the requested final target.
- At least one high-value criterion should check whether the final answer is
  presented in the form required by the question.
- Prefer criteria that directly support task completion, final-answer quality,
  and answer-object compliance.

# Forbidden Criterion Patterns
Do NOT write criteria like:
- "uses the same method as the teacher(s)"
- "matches the teacher's final answer"
- "has the same wording/style/structure as the teacher responses"
- criteria that encode a potentially wrong intermediate claim from a specific
  teacher
- criteria that mainly reward length, elaborateness, or superficial stylistic
  performance

# Output Format
Return a JSON object:
{
  "schema_version": "black_opd.rubric.v1",
  "question_domain": "math",
  "rubrics": [
    {
      "criterion_id": "c1",
      "category": "Task Completion",
      "criterion": "Produces an explicit final answer.",
      "weight": 5
    },
    {
      "criterion_id": "c3",
      "category": "Observable Quality",
      "criterion": "Identifies the parity obstruction (P(n) odd, 2024 even
                    implies no solution).",
      "weight": 5
    },
    {
      "criterion_id": "c5",
      "category": "General Reasoning",
      "criterion": "Argument is logically coherent, each step follows from
                    the last.",
      "weight": 5
    },
    ...
  ],
  "K": 6,
  "max_weighted_sum": 22,
  "estimated_student_pass_rate": 0.30
}

# Note
The example above uses K=8 purely for illustration. The Rubricator
chooses K dynamically per prompt based on the question's complexity;
the resulting K is whatever value best captures the quality dimensions
of the given (question, teacher set, student set), and may take any
integer value in [4, 12] (see Output Constraints below).

# Output Constraints
- Choose K dynamically based on the prompt's complexity; K must be an
  integer between 4 and 12 (typically 6--8).
- `weight` (w_k) must be integers from 1 to 5.
- `K` must equal the number of rubric items in the list.
- `max_weighted_sum` must equal the sum of all weights.
- `estimated_student_pass_rate` should be strictly below 0.5.

# Final Self-Check Before Answering
Before producing the JSON, verify internally that:
- every criterion can be judged on a single response without referencing any
  teacher or peer response
- the rubric would likely separate the teacher distribution from the student
  distribution
- the rubric prioritizes task completion and final-answer contract when they
  are central to the question
- the rubric does not reward superficial similarity to any specific teacher
- the rubric leaves genuine room for improvement for the students
- the rubric does not collapse into overly generic criteria only

Return only the JSON object without additional commentary.)TPL";

const char* const kVerifierTemplate =
    R"TPL(You are an expert evaluator. Your task is to assess a single response
against a set of binary answer-quality rubrics.

Your task: evaluate only the current response given the question,
response, and rubric set.

[Task Input]:
- Question: the problem being solved.
- Response: the single response currently under evaluation.
- Rubrics: a set of binary evaluation criteria. Each criterion includes:
  - criterion_id: stable identifier for this criterion
  - category: the aspect being evaluated (context label only; do not
    introduce extra requirements beyond the criterion text)
  - criterion: a binary statement that rewards a specific merit
  - weight: the weight w_k assigned when this criterion is satisfied;
    used only for final score aggregation, not for judging satisfaction

[Core Evaluation Rules]:
For each criterion, determine whether the current response exhibits the
described merit.
- Judge each criterion using only the question, the response, and the
  criterion text itself. Do not add extra standards not explicitly
  required by the question or rubric.
- If a criterion contains multiple explicit conditions, mark it `true`
  only when ALL conditions are met; mark `false` otherwise.
- If the response uses a different but equally valid method that still
  exhibits the described merit, mark it `true`.
- If the merit is not clearly demonstrated, mark it `false`.

[Task Instructions]:
Evaluate each criterion in the given order:
- If the criterion is satisfied, output `true`.
- Otherwise output `false`.
- weighted_score = sum of weights of all criteria marked `true`.
- pass_rate = weighted_score / (sum of all criteria weights).

[Output Format]
Return a JSON object:
{
  "schema_version": "black_opd.verifier.v1",
  "judgements": [true, false, true],
  "weighted_score": 7,
  "pass_rate": 0.35
}

[Output Constraints]
- `schema_version` must be exactly `black_opd.verifier.v1`.
- `judgements` list must be in the same order as the input rubric.
- `weighted_score` = sum of weights where judgement is true
  (sum w_k * v_{i,k}).
- `pass_rate` = weighted_score / sum of all weights
  = (sum w_k * v_{i,k}) / (sum w_k).

[Important Guidelines]
- Be objective and judge each criterion independently.
- No partial credit within a single criterion.
- Do not mark `true` for superficial features such as length, confident
  tone, or stylistic performance unless the criterion explicitly requires
  them.

Now evaluate the following:
Question: {question}
Response: {resp}
Rubrics: {rubrics}

Return only the JSON object, without any additional text or commentary.)TPL";

namespace {

// Slot markers are located in the pristine template before any value is
// inserted, so slot values containing marker-like text cannot derail later
// substitutions.
std::string render(const std::string& tpl,
                   std::vector<std::pair<std::string, std::string>> slots) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // (position, slot index)
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::size_t pos = tpl.find(slots[i].first);
    if (pos == std::string::npos) {
      throw Error(ErrorKind::ConfigError,
                  "template slot '" + slots[i].first + "' not found");
    }
    spans.emplace_back(pos, i);
  }
  std::sort(spans.begin(), spans.end());
  std::string out;
  std::size_t cursor = 0;
  for (const auto& [pos, idx] : spans) {
    out.append(tpl, cursor, pos - cursor);
    out += slots[idx].second;
    cursor = pos + slots[idx].first.size();
  }
  out.append(tpl, cursor, tpl.size() - cursor);
  return out;
}

std::string numbered_block(const std::vector<std::string>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out << '\n';
    out << '[' << (i + 1) << "]: " << values[i];
  }
  return out.str();
}

}  // namespace

std::string render_rubricator_prompt(const std::string& question,
                                     const std::vector<std::string>& teacher_answers,
                                     const std::vector<std::string>& student_rollouts) {
  return render(
      kRubricatorTemplate,
      {{"{question}", question},
       {"(m answers)", "(" + std::to_string(teacher_answers.size()) + " answers)"},
       {"(n rollouts)", "(" + std::to_string(student_rollouts.size()) + " rollouts)"},
       {"[1]: {teacher_response_1}\n...\n[m]: {teacher_response_m}",
        numbered_block(teacher_answers)},
       {"[1]: {student_response_1}\n...\n[n]: {student_response_n}",
        numbered_block(student_rollouts)}});
}

std::string render_verifier_prompt(const std::string& question,
                                   const std::string& response, const RubricSet& rubric) {
  json items = json::array();
  for (const RubricItem& item : rubric.items) {
    items.push_back({{"criterion_id", item.criterion_id},
                     {"category", to_string(item.category)},
                     {"criterion", item.criterion},
                     {"weight", item.weight}});
  }
  return render(kVerifierTemplate, {{"{question}", question},
                                    {"{resp}", response},
                                    {"{rubrics}", items.dump(2)}});
}

}  // namespace ropd::rubric
