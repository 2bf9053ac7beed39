// Copyright 2026 The evotod Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Prompt bodies and the static zero-shot strategies. Placeholders use
// {snake_case} names; other braces are literal JSON.

#include "evotod/llm_gateway.hpp"

#include "evotod/errors.hpp"

namespace evotod {

namespace {

constexpr const char* kDSTBody = R"TPL(## Dialog STATE TRACKER
- Domains: {domains}
- User Utterance: {user_utterance}

{previous_belief_state}

{formatted_history}

{formatted_esb}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the User Output (if any)",
  "belief_state": {"domain1": {"slot1": "value1", "slot2": "value2"}, "domain2": {...}},
  "reason": "Explanation of belief state changes"
})TPL";

constexpr const char* kDPBody = R"TPL(## Dialog POLICY AGENT        
- Domains: {domains}
- Lasted User Utterance: {user_utterance}
- Current Belief State: {belief_state}
- Previous Belief State:{pre_belief_state}

{formatted_history}

{formatted_esb}

## SYSTEM ACTION TYPES:
- inform(slot=value): Provide information to the user about a specific slot
- request(slot): Request more information from the user for a specific slot
- recommend(entity): Recommend a specific entity to the user
- select(entity): Select an entity from the database results
- nooffer(): Inform user that no matching results were found
- book(slot1=value1,slot2=value2): Make a booking with specified parameters
- nobook(): Inform user that booking cannot be completed
- offerbook(slot1=value1,slot2=value2): Offer booking options with specified parameters
- offerbooked(booking_details): Confirm successful booking with details

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the Belief State Changes (if any)",
  "system_action": "appropriate action based on the current context",
  "reason": "Your reason for the DP output",
  "query_db": true/false,
  "query": {
    "domain": "the name of domain to query",
    "state": {"the name of domain to query": {"slot_name1": "value1", "slot_name2": "value2"} }
  }
})TPL";

constexpr const char* kNLGBody = R"TPL(## Dialog STATE TRACKER
- Domains: {domains}
- User Utterance: {user_utterance}
- System action: {system_action}

{formatted_db_results}

{formatted_history}

{formatted_esb}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the DP output (if any)",
  "system_utterance": "your natural system response",
  "reason": "Your reason for the NLG output"
})TPL";

constexpr const char* kUserSimBody = R"TPL(## USER SIMULATOR AGENT
- Domain: {domains}
- User Goal: {goal}

## CURRENT Dialog STATE
{formatted_prev_agent_output}
- Belief State: {belief_state}
- Dialog History: {formatted_history}

## INSTRUCTIONS
Analyze the previous system response. If there are any issues, provide critique. If the output is good, leave critique as empty string.

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Constructive feedback on the previous system response (if any)"
})TPL";

constexpr const char* kE2EPart1Body = R"TPL(## END-TO-END AGENT
- Domains: {domains}
- User Utterance: {user_utterance}
- Previous Belief State: {pre_belief_state}

{formatted_history}

{formatted_esb}

## SYSTEM ACTION TYPES:
- inform(slot=value): Provide information to the user about a specific slot
- request(slot): Request more information from the user for a specific slot
- recommend(entity): Recommend a specific entity to the user
- select(entity): Select an entity from the database results
- nooffer(): Inform user that no matching results were found
- book(slot1=value1,slot2=value2): Make a booking with specified parameters
- nobook(): Inform user that booking cannot be completed
- offerbook(slot1=value1,slot2=value2): Offer booking options with specified parameters
- offerbooked(booking_details): Confirm successful booking with details

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the User Output (if any)",
  "belief_state": {"domain1": {"slot1": "value1", "slot2": "value2"}, "domain2": {...}},
  "system_action": "appropriate action based on the current context",
  "reason": "Your reason for the output",
  "db_query_needed": true/false,
  "query": {
    "domain": "the name of domain to query",
    "state": {"the name of domain to query": {"slot_name1": "value1", "slot_name2": "value2"} }
  },
  "system_utterance": "your natural system response (only if db_query_needed is false)"
})TPL";

constexpr const char* kE2EPart2Body = R"TPL(## END-TO-END AGENT (with Database Results)
- Domains: {domains}
- User Utterance: {user_utterance}
- Current Belief State: {belief_state}
- System Action: {system_action}

{formatted_db_results}

{formatted_history}

{formatted_esb}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "system_utterance": "your natural system response",
  "reason": "Your reason for the output"
})TPL";

constexpr const char* kArbiterBody = R"TPL(## ARBITRATION AGENT
- Domains: {domains}
- Target Module: {target_agent} ({agent_role})
- Original Output from {target_agent}: {original_output}
- Critique from {critic_agent}: {critique_content}

## CONTEXT
{formatted_history}
{formatted_belief_state}

## TASK
Evaluate the original output from {target_agent} and the critique provided by {critic_agent}. 
Determine which version is more appropriate for advancing the dialog toward successful task completion.

## EVALUATION CRITERIA
1. Correctness: Adherence to domain ontology and dialog state consistency.
2. Efficiency: Contribution to reducing dialog turns and avoiding unnecessary clarifications.
3. Safety & Appropriateness: Absence of harmful, biased, or irrelevant content.
4. Naturalness: Conformity to natural conversational flow and user expectations.

## OUTPUT INSTRUCTIONS
After evaluation, generate the final output that should be used for the subsequent dialog turn. 
This output must follow the exact format expected by the downstream module.

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "final_output": { ... },
  "reason": "Clear rationale for choosing this output over the alternative",
  "critique_accepted": true/false
})TPL";

constexpr const char* kGenesisBody = R"TPL(## Task:
Generate {num} comprehensive optimization strategies for a specific module in a pipeline-based Task-Oriented Dialog System.

## Domains:
{domain_str}

## Target Module:
{agent_type}({agent_role})

## Goal:
The strategies should aim to enhance the overall performance of the TODS by increasing task completion rate and reducing the average number of dialog turns (improving efficiency).

## Requirements for Strategies:
1. Each strategy must be a self-contained, actionable recommendation.
2. Describe the strategy concisely in 3 to 5 items.
3. Focus on specific techniques, architectural adjustments, or training methods relevant to the target module.
4. Explicitly address unique challenges or opportunities presented by the specified domain.
5. Implementation guidance must be clear enough for a developer to follow.
6. Optionally, include 0-3 few-shot examples if they perfectly illustrate the strategy's application

## Number of Strategies: {num}

## Output Format
Output MUST be a valid JSON array only, with no additional text, explanations, or markdown formatting.
[
  {
    "reason": "A clear, one sentence explanation of the performance bottleneck or optimization opportunity this strategy addresses for the specified module and domain.",
    "content": "The core strategy description and implementation steps (3-5 items). May include examples."
  },
  ...continue for all {num} strategies
])TPL";

constexpr const char* kMutationBody = R"TPL(## Task:
You are an expert in Task-Oriented Dialog Systems optimization. Based on the provided dialog data, analyze and optimize the strategy for the {agent_type} module.

## Context:
- Target Module: {agent_type}
- Agent Goal: {agent_goal}
- Domain: {domain_str}
- Dialog Result: {dialog_result}

## Input Data

### Dialog Goal
{goal}

### Dialog History
{formatted_history}

### Current Strategies
{strategies_by_type}

### Feedback Analysis
{evolve_data}

## TASK INSTRUCTIONS

### Step 1: Strategy Evaluation
Score the current strategy's effectiveness in this dialog:
- 1 (Helpful): Strategy contributed positively to dialog success or efficiency
- 0 (Neutral): Strategy had no clear positive or negative impact
- -1 (Harmful): Strategy directly contributed to dialog failure or inefficiency

Consider these factors when scoring:
1. Module specific performance in this dialog
2. Impact on overall task completion
3. Contribution to dialog efficiency (turn reduction)

### Step 2: Gap Analysis
Identify specific gaps between the current strategy and optimal performance by analyzing:
1. Dialog failures or inefficiencies in the history
2. Feedback insights and recommendations
3. Domain specific challenges that emerged

### Step 3: Strategy Optimization
Create an updated strategy that addresses the identified gaps while maintaining effective aspects of the current strategy. Ensure the updated strategy:
1. Addresses Specific Issues: Directly targets problems observed in the dialog
2. Provides Actionable Guidance: Clear, implementable recommendations
3. Leverages Domain Knowledge: Incorporates {domain_str} specific best practices
4. Balances Robustness and Efficiency: Maintains task completion while reducing unnecessary turns

### Step 4: Reasoning
Provide clear rationale explaining: What specific improvements the updated strategy makes

## Output Format
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
    "strategy": {
        "agent_type": "{agent_type}",
        "content": "Updated strategy description (1-3 few-shot expamles if needed)",
        "reason": "Clear rationale for the update one sentence explaining what issues were addressed)",
        "score": 1|0|-1
    }
})TPL";

constexpr const char* kConsolidationBody = R"TPL(## Task:
Merge multiple semantically similar strategies into one comprehensive strategy for {agent_type} module for {domains_str} domain(s) in a Task-Oriented Dialog System.

## Merging Guidelines:
1. Analyze the provided strategies to identify: 1) Common themes and techniques, 2) Complementary ideas, 3) domain specific nuances.
2. Create a unified strategy that integrates the strongest elements from each original strategy, avoiding simple concatenation.
3. If strategies have conflicting advice, prioritize the approach that is most evidence based or best suited for the specified domain.
4. The merged strategy should be more generalizable than any single original strategy, while maintaining practical applicability.
5. Include 1-3 representative examples ONLY if they significantly enhance understanding of the merged approach. Adapt examples to better illustrate the integrated strategy.

{strategies_text}

# Output Format
Output ONLY a valid JSON object with exactly the structure below. Do not include any additional text, explanations, or markdown formatting.
{
    "content": "Merged strategy description here",
    "reason": "Summary of the merged strategy's purpose and value"
})TPL";

constexpr const char* kStaticDST = R"TPL(1. Analyze User Utterance
- Extract slot value mentions from the user's current utterance
- Identify corrections, updates, or confirmations of existing values
- Analyze the previous User Output (user utterance). If there are any issues, provide critique. If the output is good, leave critique as empty string.

2. Update Belief State
- Only modify existing slots: DO NOT create new slots or domains
- Corrections: If user corrects a slot (e.g., "actually I want X"), replace the old value
- Updates: If user provides new information for a slot, update it
- Persistence: If slot not mentioned, keep its current value unchanged
- Handling uncertainty: If utterance is ambiguous, prefer keeping current value unless clear update

3. Quality Check
- Verify all slot values are consistent with the utterance
- Ensure domain constraints are respected
- Check for contradictions between slots)TPL";

constexpr const char* kStaticDP = R"TPL(1. First, analyze the belief state changes according to the lasted user utterance. If there are any issues, provide critique. If the output is good, leave critique as empty string.
2. Analyze the user's utterance and current belief state to determine the appropriate system action
3. CRITICAL: ALWAYS query the database for any information needed, NEVER use your own knowledge or common sense
4. Set "query_db" to true for ALL actions that require entity information, and specify the query parameters using the filled slots
5. Generate system action based ONLY on database query results, NEVER fabricate or assume any entity details, prices, addresses, or availability
6. Provide a reason for the DP output)TPL";

constexpr const char* kStaticNLG = R"TPL(1. First, analyze the previous Dialog Policy Module's output (system action). If there are any issues, provide critique. If the output is good, leave critique as empty string.
2. Understand the intent behind the system action. Use the provided strategies to handle specific response patterns.
3. Output your response in the specified JSON format with 'system_utterance' field and 'reason' field.
4. Ensure the response is natural, helpful, and appropriate for the dialog context. Keep the response concise but informative.)TPL";

}  // namespace

const std::string& template_body(TemplateId id) {
  static const std::string bodies[] = {kDSTBody,      kDPBody,       kNLGBody,     kUserSimBody,
                                       kE2EPart1Body, kE2EPart2Body, kArbiterBody, kGenesisBody,
                                       kMutationBody, kConsolidationBody};
  const auto i = static_cast<std::size_t>(id);
  if (i >= std::size(bodies)) throw NotFoundError("unknown template id");
  return bodies[i];
}

const std::string& static_strategy_text(AgentType type) {
  static const std::string texts[] = {kStaticDST, kStaticDP, kStaticNLG};
  return texts[static_cast<std::size_t>(type)];
}

}  // namespace evotod
