"""Instruction-tuning prompt templates and trajectory text rendering.

The template literals here are load-bearing: exporters must emit them
byte-for-byte, and the test suite pins the key phrases. Placeholders use
str.format-style named fields.
"""

from __future__ import annotations

WEEKDAY_NAMES = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")


def slot_hhmm(slot: int) -> str:
    return f"{slot // 2:02d}:{(slot % 2) * 30:02d}"


def visit_line(weekday: int, slot: int, location: str) -> str:
    """One history-trajectory line, carrying the weekday."""
    return f"At {WEEKDAY_NAMES[weekday]} {slot_hhmm(slot)}, visited location {location}."


def generated_point_line(slot: int, location: str) -> str:
    """One generated next-day point: 'At [time], visited location [location index]'."""
    return f"At {slot_hhmm(slot)}, visited location {location}"


def render_history_text(points) -> str:
    """Multi-day trajectory text from (weekday, slot, location-key) triples
    or TrajPoint-like objects."""
    lines = []
    for p in points:
        if hasattr(p, "slot"):
            lines.append(visit_line(p.weekday, p.slot, p.location_key))
        else:
            w, s, k = p
            lines.append(visit_line(int(w), int(s), str(k)))
    return "\n".join(lines)


def render_generated_day(points) -> str:
    """Next-day trajectory text from (slot, location-key) pairs."""
    return "\n".join(generated_point_line(int(s), str(k)) for s, k in points)


LOC2ID_TEMPLATE = (
    "Your task is to infer the corresponding Location index based on the "
    "geographic location information: {location}\n Its Location index is :"
)

ID2LOC_TEMPLATE = (
    "Your goal is to learn and remember the geographic location information "
    "represented by the Location index.\n The geographic information of "
    "Location index {index} is :"
)

UNDERSTANDING_PREDICTION_TEMPLATE = (
    "This is a user trajectory prediction task. Your goal is to predict the next "
    "location index using both an authoritative trajectory text and a possibly "
    "noisy sequence embedding.\n"
    "Provided:\n"
    "- Ground-truth trajectory text (always correct): {traj_data}\n"
    "- Sequence embedding of the trajectory (auxiliary signal): {sequence}\n"
    "Conflict/irrelevance handling:\n"
    "- If any embedding-based interpretation contradicts the trajectory text or "
    "reflects a trajectory largely unrelated to the text, disregard the embedding "
    "interpretation and rely on the text.\n"
    "- Only incorporate embedding cues that align with the text.\n"
    "Tasks:\n"
    "1. Based on the trajectory text and your analysis of the sequence embedding "
    "(ignore it if inconsistent with the text), produce the user's spatio-temporal "
    "trajectory features, filling the template exactly:\n"
    "Summary of the spatio-temporal trajectory features:\n"
    "- Most frequently visited locations (visited more than once): [Output at most "
    "the first three (if any)]\n"
    "- Probability of visits by time period (rounded to 5%): [list all periods with "
    "probability values, even if 0%]\n"
    "2. Using these features and the inputs (if sequence embedding appears "
    "inconsistent with the textual trajectory, ignore it), predict the user's next "
    "location index.\n"
    "Output only the completed feature block and the final prediction. Do not "
    "include explanations."
)

UNDERSTANDING_GENERATION_TEMPLATE = (
    "The user's original trajectory data contains weekday, timestamp, and location "
    "index information. Below is the encoded vector of the user's trajectory "
    "sequence for the past two days:\n"
    "{sequence}\n"
    "In addition, there also has a special text format description of the user's "
    "historical trajectory as supplementary information: {history_text}.\n"
    "You need to first carefully interpret both the encoded trajectory sequence "
    "(embedding) and the historical textual trajectory description, and then "
    "complete the following two tasks:\n"
    "Step 1: Generate 'Summary of the trajectory preferences for this user' "
    "strictly in the following format:\n"
    "Summary of the trajectory preferences for this user:\n"
    "- Most frequently visited locations (visited more than once): [Output at most "
    "the first three (if any)]\n"
    "- Probability of visits by time period (rounded to 5%): [list all periods with "
    "probability values, even if 0%]\n"
    "- Frequently visited locations during each time period: [list per period; if "
    "none, explicitly say 'No location was visited more than once'].\n"
    "Step 2: Based on both the summary and the encoded vector together with the "
    "historical textual trajectory description, generate the user's trajectory "
    "activity for the next day. Each data point in the generated trajectory should "
    "be in the format: At [time], visited location [location index]."
)

REASONING_HEADER_TEMPLATE = (
    "Please answer the following questions step by step. You need to think and "
    "reason before answering, outputting your reasoning process between <think> "
    "and </think>, and providing your final answer between <answer> and "
    "</answer>.\n"
    "Input: Historical trajectory data, initial generated trajectory, "
    "spatiotemporal constraints.\n"
    "Task: Modify the initial trajectory data based on the historical data and "
    "the spatiotemporal constraints of the scene. Ensure that the modified "
    "trajectory conforms to the given statistical spatiotemporal characteristics "
    "and uses the minimum modification step size."
)

# The token pattern below reads <a_x><b_x><c_x><d_x>: one prefix per
# quantization layer, matching the rendered location IDs.
SELF_REFLECTION_TEMPLATE = (
    "You are an intelligent assistant skilled at asking questions and thinking. "
    "Please solve the following problem step by step. First, you should think "
    "through the reasoning process and then provide the answer to the user. The "
    "reasoning process and answer are contained in the <think> </think> and "
    "<answer> </answer> tags, respectively, i.e., <think>reasoning process here "
    "</think><answer>answer here </answer>.\n"
    "\n"
    "You need to complete the following trajectory modification task:\n"
    "\n"
    "Input:\n"
    "Completely known input:\n"
    "1. Given two days of historical behavior data\n"
    "2. Previously generated user trajectory data for the next day\n"
    "3. Statistical spatiotemporal features of historical behavior data\n"
    "4. Statistical spatiotemporal features of real data for the next day\n"
    "5. Given Modification Steps: {constraint}, and then K trajectory "
    "modifications (the specific value of K is determined by your own analysis).\n"
    "\n"
    "Task Requirements: Based on fully known inputs, modify and improve "
    "previously generated trajectory data for the next day, using the given "
    "modification steps, and ensure that the modified trajectory data is "
    "maximally consistent with the Statistical spatiotemporal features of real "
    "data for the next day. The analytical support should only be derived from "
    "fully known inputs. The final output should include a summary of the "
    "modification steps and the corresponding reasons, as well as the final user "
    "trajectory for the next day after the modification steps. Be careful not to "
    "analyze {token_pattern} separately. {token_pattern} together form a whole to "
    "describe a specific location. Do not add or generate new {token_pattern} "
    "when modifying. When modifying a previous future trajectory, only locations "
    "that have appeared in history and previously generated future trajectories, "
    "as well as locations that have appeared in the spatiotemporal features "
    "corresponding to the given future day's real trajectory data, can be used. "
    "For the time modification, you can generate timestamps that are not in the "
    "historical sequence or previously generated future tracks. Note that "
    "deleting a track, adding a track, or modifying a track (either location, "
    "time, or both) is considered a single operation. Please complete the "
    "reasoning analysis based on this, using as few modification steps as "
    "possible.\n"
    "\n"
    "Specific input data is as follows:\n"
    "Fully known input:\n"
    "1. Given historical behavior data: {data1}\n"
    "2. Previously generated user trajectory data for the next day: {data2}\n"
    "3. Statistical spatiotemporal features of historical behavior data: {data3}\n"
    "4. Statistical spatiotemporal features of real data for the next day: {data4}"
)


def token_pattern(n_layers: int) -> str:
    return "".join(f"<{chr(ord('a') + n)}_x>" for n in range(n_layers))


SEQUENCE_PLACEHOLDER = "<sequence>"
