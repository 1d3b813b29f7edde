use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiseaseState {
    Susceptible,
    Exposed,
    Presymptomatic,
    InfectiousSymptomatic,
    InfectiousAsymptomatic,
    Recovered,
}

impl DiseaseState {
    pub fn is_infectious(self) -> bool {
        matches!(
            self,
            DiseaseState::Presymptomatic
                | DiseaseState::InfectiousSymptomatic
                | DiseaseState::InfectiousAsymptomatic
        )
    }

    /// Ever left the susceptible state.
    pub fn ever_infected(self) -> bool {
        self != DiseaseState::Susceptible
    }

    /// Whether `self -> next` is an edge of S→E→{P→Sym, Asym}→R (or a self-loop).
    pub fn may_transition_to(self, next: DiseaseState) -> bool {
        use DiseaseState::*;
        self == next
            || matches!(
                (self, next),
                (Susceptible, Exposed)
                    | (Exposed, Presymptomatic)
                    | (Exposed, InfectiousAsymptomatic)
                    | (Presymptomatic, InfectiousSymptomatic)
                    | (InfectiousSymptomatic, Recovered)
                    | (InfectiousAsymptomatic, Recovered)
            )
    }
}

/// Inclusive day interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i32,
    pub end: i32,
}

impl Window {
    pub fn contains(&self, day: i32) -> bool {
        self.start <= day && day <= self.end
    }
}

/// Starts a window `[day + 1, day + len]`, or extends an active one.
pub(crate) fn extend_window(w: &mut Option<Window>, day: i32, len: u32) {
    if len == 0 {
        return;
    }
    let end = day + len as i32;
    match w {
        Some(cur) if cur.end >= day => cur.end = cur.end.max(end),
        _ => {
            *w = Some(Window {
                start: day + 1,
                end,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEpiState {
    pub disease: DiseaseState,
    pub vaccinated: bool,
    pub boosted: bool,
    /// Day of the primary dose; negative for doses before the run.
    pub vaccinated_day: Option<i32>,
    pub diagnosed: bool,
    pub diagnosis_day: Option<i32>,
    pub quarantine: Option<Window>,
    pub mask: Option<Window>,
    pub day_of_state_entry: i32,
    /// Day the current disease state ends.
    pub(crate) next_transition: i32,
    pub(crate) infectiousness: f32,
    pub(crate) will_be_asymptomatic: bool,
}

impl Default for AgentEpiState {
    fn default() -> Self {
        Self {
            disease: DiseaseState::Susceptible,
            vaccinated: false,
            boosted: false,
            vaccinated_day: None,
            diagnosed: false,
            diagnosis_day: None,
            quarantine: None,
            mask: None,
            day_of_state_entry: 0,
            next_transition: i32::MAX,
            infectiousness: 1.0,
            will_be_asymptomatic: false,
        }
    }
}

impl AgentEpiState {
    pub fn is_quarantined(&self, day: i32) -> bool {
        self.quarantine.is_some_and(|w| w.contains(day))
    }

    pub fn is_masked(&self, day: i32) -> bool {
        self.mask.is_some_and(|w| w.contains(day))
    }

    pub fn quarantined_until(&self) -> Option<i32> {
        self.quarantine.map(|w| w.end)
    }

    pub fn masked_until(&self) -> Option<i32> {
        self.mask.map(|w| w.end)
    }

    /// Multiplier on the probability of acquiring infection.
    pub(crate) fn susceptibility(&self, vaccine_efficacy: f64, booster_efficacy: f64) -> f64 {
        if self.boosted {
            1.0 - booster_efficacy
        } else if self.vaccinated {
            1.0 - vaccine_efficacy
        } else {
            1.0
        }
    }
}
