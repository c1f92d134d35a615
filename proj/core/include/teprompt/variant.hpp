#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "teprompt/templating.hpp"
#include "teprompt/verbalizer.hpp"

namespace teprompt {

/// Model variants of the ablation study.
enum class AblationVariant {
  Teprompt,         // three tasks, two gates, fused DRR head decides
  DrrOnly,          // DRR prompt alone
  SscOnly,          // arguments + SSC template, SSC head decides
  AcpOnly,          // arguments + ACP template, ACP head decides
  TepromptSscHead,  // full training, SSC head decides
  TepromptAcpHead,  // full training, ACP head decides
  TepromptNoGate,   // full training, raw DRR mask state decides
  DrrPlusSsc,       // DRR + SSC, single main gate on the SSC [CLS]
  DrrPlusAcp,       // DRR + ACP, single main gate on the ACP [CLS]
};

inline constexpr std::array<AblationVariant, 9> kAllVariants = {
    AblationVariant::Teprompt,        AblationVariant::DrrOnly,         AblationVariant::SscOnly,
    AblationVariant::AcpOnly,         AblationVariant::TepromptSscHead, AblationVariant::TepromptAcpHead,
    AblationVariant::TepromptNoGate,  AblationVariant::DrrPlusSsc,      AblationVariant::DrrPlusAcp};

/// How the DRR decision state is formed.
enum class FusionMode {
  TwoGate,      // h~_c from both [CLS] states, then the main gate
  MainGateSsc,  // main gate with h~_c := SSC [CLS]
  MainGateAcp,  // main gate with h~_c := ACP [CLS]
  None,         // raw DRR [MASK] state
};

struct VariantSpec {
  PromptLayout layout;
  bool drr_loss;
  bool ssc_loss;
  bool acp_loss;
  FusionMode fusion;
  Task decision_head;
};

VariantSpec spec_of(AblationVariant variant);

std::string_view to_string(AblationVariant variant);
std::optional<AblationVariant> parse_variant(std::string_view name);
/// Throws ConfigError listing all nine names.
AblationVariant parse_variant_or_throw(std::string_view name);
/// "teprompt, drr_only, ..." for usage messages.
std::string variant_name_list();

}  // namespace teprompt
