#pragma once

#include <array>
#include <string_view>

#include "cimllm/llm.hpp"

namespace fixture {

struct LabelCase {
  std::string_view text;
  cimllm::PredictedLabel label;
  bool ambiguous;
};

inline constexpr auto M = cimllm::PredictedLabel::Mutant;
inline constexpr auto W = cimllm::PredictedLabel::Wildtype;
inline constexpr auto U = cimllm::PredictedLabel::Unparseable;

inline constexpr std::array<LabelCase, 40> kLabelCases{{
    // expected format
    {"**IDH mutant**\nNon-enhancing, frontal, high mismatch ratio.", M, false},
    {"**IDH wildtype**\nRing enhancement with central necrosis.", W, false},
    {"<**IDH mutant**> \n <Reasoning>", M, false},
    // spellings
    {"IDH mutant", M, false},
    {"IDH-mutant", M, false},
    {"idh_mutant", M, false},
    {"IDH MUTANT", M, false},
    {"IDH Mutation", M, false},
    {"mutated", M, false},
    {"IDH status: MUTATED.", M, false},
    {"IDH1-mutant", M, false},
    {"IDH2-mutant", M, false},
    {"IDH1 mut", M, false},
    {"Final IDH type: mutant", M, false},
    {"**IDH-wildtype**", W, false},
    {"wildtype", W, false},
    {"Wild-type", W, false},
    {"wild type", W, false},
    {"IDH_WILDTYPE", W, false},
    {"IDH-wt", W, false},
    {"IDH wild\xE2\x80\x91type", W, false},
    {"IDH\xE2\x80\x93mutant", M, false},
    {"*IDH wildtype*", W, false},
    {"__IDH mutant__", M, false},
    // line handling and fallback
    {"   \n\n**IDH wildtype**\nreasoning", W, false},
    {"\r\n**IDH mutant**\r\nreason", M, false},
    {"The tumor is likely IDH-Mutated given the mismatch sign.", M, false},
    {"Assessment:\nThe features favour an IDH-wildtype glioblastoma.", W, false},
    {"Reasoning first.\nLarge enhancing rim.\n**IDH wildtype**", W, false},
    {"Prediction:\n\n**IDH Wildtype**\n", W, false},
    {"**IDH mutant**\nA wildtype tumour would enhance.", M, false},
    // both classes on the deciding line
    {"IDH mutant vs wildtype: favour mutant", M, true},
    {"**IDH wildtype** (not mutant)", W, true},
    {"Between wild-type and mutated, mutated is favoured.", W, true},
    // no class phrase
    {"", U, false},
    {"   \n\t\n", U, false},
    {"I cannot determine the IDH status.", U, false},
    {"No prediction.", U, false},
    {"Mutational burden unknown.", U, false},
    {"The lesion looks immutable.", U, false},
}};

}  // namespace fixture
