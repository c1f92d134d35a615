#include "teprompt/variant.hpp"

#include "teprompt/errors.hpp"

namespace teprompt {

VariantSpec spec_of(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::Teprompt:
      return {PromptLayout::Full, true, true, true, FusionMode::TwoGate, Task::Drr};
    case AblationVariant::DrrOnly:
      return {PromptLayout::DrrOnly, true, false, false, FusionMode::None, Task::Drr};
    case AblationVariant::SscOnly:
      return {PromptLayout::ArgsSsc, false, true, false, FusionMode::None, Task::Ssc};
    case AblationVariant::AcpOnly:
      return {PromptLayout::ArgsAcp, false, false, true, FusionMode::None, Task::Acp};
    case AblationVariant::TepromptSscHead:
      return {PromptLayout::Full, true, true, true, FusionMode::TwoGate, Task::Ssc};
    case AblationVariant::TepromptAcpHead:
      return {PromptLayout::Full, true, true, true, FusionMode::TwoGate, Task::Acp};
    case AblationVariant::TepromptNoGate:
      return {PromptLayout::Full, true, true, true, FusionMode::None, Task::Drr};
    case AblationVariant::DrrPlusSsc:
      return {PromptLayout::DrrSsc, true, true, false, FusionMode::MainGateSsc, Task::Drr};
    case AblationVariant::DrrPlusAcp:
      return {PromptLayout::DrrAcp, true, false, true, FusionMode::MainGateAcp, Task::Drr};
  }
  throw std::logic_error("unhandled variant");
}

std::string_view to_string(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::Teprompt: return "teprompt";
    case AblationVariant::DrrOnly: return "drr_only";
    case AblationVariant::SscOnly: return "ssc_only";
    case AblationVariant::AcpOnly: return "acp_only";
    case AblationVariant::TepromptSscHead: return "teprompt_ssc_head";
    case AblationVariant::TepromptAcpHead: return "teprompt_acp_head";
    case AblationVariant::TepromptNoGate: return "teprompt_no_gate";
    case AblationVariant::DrrPlusSsc: return "drr_plus_ssc";
    case AblationVariant::DrrPlusAcp: return "drr_plus_acp";
  }
  return "?";
}

std::optional<AblationVariant> parse_variant(std::string_view name) {
  for (auto v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

std::string variant_name_list() {
  std::string out;
  for (auto v : kAllVariants) {
    if (!out.empty()) out += ", ";
    out += to_string(v);
  }
  return out;
}

AblationVariant parse_variant_or_throw(std::string_view name) {
  if (auto v = parse_variant(name)) return *v;
  throw ConfigError("unknown variant \"" + std::string(name) + "\"; expected one of: " + variant_name_list());
}

}  // namespace teprompt
