//! Reference question/SQL pairs used to exercise the front end, seed the
//! offline model stub and check lint behaviour.
//!
//! The SQL texts are kept exactly as a model produced them, including their
//! mistakes; the stored query library holds the corrected forms.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorpusEntry {
    pub id: &'static str,
    pub question: &'static str,
    pub sql: &'static str,
    /// False for the translation known to answer a different question.
    pub correct: bool,
    /// A hand-corrected variant of an incorrect translation.
    pub corrected_variant: bool,
}

pub const C_SECTIONS_2024: &str = "SELECT COUNT(*) AS total_c_sections 
FROM (SELECT 1 
      FROM programmed_c_section AS pcs
      WHERE EXISTS (SELECT 1 
                    FROM delivery AS d
                    WHERE pcs.pregnancy_id = d.pregnancy_id 
                        AND EXTRACT(YEAR FROM d.delivery_date) = 2024)    
    UNION ALL
      SELECT 1 
      FROM delivery_with_labor AS dwl
      WHERE EXISTS (SELECT 1 
                    FROM delivery AS d
                    WHERE dwl.pregnancy_id = d.pregnancy_id 
                        AND EXTRACT(YEAR FROM d.delivery_date) = 2024
                        AND d.delivery_type = 'emergency_c_section' ) 
    ) AS c_sections;";

pub const PH_BELOW: &str = "SELECT p.name, d.delivery_date
FROM delivery d 
    JOIN newborn n ON d.pregnancy_id = n.pregnancy_id
    JOIN patient p ON d.pregnancy_id = p.tc
WHERE n.ph < 7.1;";

pub const MOTIVATIONS_INCORRECT: &str = "    SELECT motivation 
    FROM programmed_c_section 
UNION
    SELECT motivation 
    FROM delivery_with_labor;";

pub const MOTIVATIONS_CORRECTED: &str = "    SELECT motivation 
    FROM programmed_c_section 
UNION
    SELECT motivation 
    FROM delivery_with_labor
    WHERE delivery_subtype = 'emergency_c_section';";

pub const LACERATIONS: &str = "SELECT laceration, 
       COUNT(*), 
       ROUND((COUNT(*) * 100.0 / (SELECT COUNT(*) 
                                  FROM delivery_with_labor)), 2)
FROM delivery_with_labor
GROUP BY laceration
ORDER BY count DESC;";

pub const INDUCED_DELIVERIES: &str = "SELECT COUNT(DISTINCT i.pregnancy_id) AS induced_deliveries_count,
       ROUND((COUNT(DISTINCT i.pregnancy_id) * 100.0
              / COUNT(DISTINCT d.pregnancy_id)), 2)
              AS induced_deliveries_percentage
FROM induction i 
        JOIN delivery d ON i.pregnancy_id = d.pregnancy_id;";

pub const AVG_INDUCTION_INTERVAL: &str = "SELECT AVG(EXTRACT(
           EPOCH FROM (d.expulsion_time - i.administration_time)))
           / 3600 AS average_interval_hours
FROM induction i 
        JOIN delivery_with_labor d ON i.pregnancy_id = d.pregnancy_id;";

pub const INDUCTIONS_PER_PATIENT: &str = "SELECT p.tc AS patient_tc, 
       p.name AS patient_name, 
       p.surname AS patient_surname, 
       COUNT(i.pregnancy_id) AS number_of_inductions 
FROM patient p
        JOIN delivery d ON p.tc = (SELECT patient_tc                               
                                   FROM pregnancy                            
                                   WHERE id = d.pregnancy_id) 
        JOIN induction i ON d.pregnancy_id = i.pregnancy_id
WHERE EXTRACT(YEAR FROM d.delivery_date) = 2025
GROUP BY p.tc, p.name, p.surname 
ORDER BY p.tc;";

/// The source text breaks off inside the pattern literal; the predicate is
/// completed to match either motivation column against `%CTG%`.
pub const CTG_RELATED: &str = "SELECT p.*, 
       pr.* 
FROM patient p
    JOIN pregnancy pr ON p.tc = pr.patient_tc 
    JOIN delivery d ON pr.id = d.pregnancy_id 
    LEFT JOIN programmed_c_section pcs
                ON d.pregnancy_id = pcs.pregnancy_id 
    LEFT JOIN delivery_with_labor dwl
                ON d.pregnancy_id = dwl.pregnancy_id 
WHERE pcs.motivation ILIKE '%CTG%' OR dwl.motivation ILIKE '%CTG%';";

pub const ENTRIES: [CorpusEntry; 9] = [
    CorpusEntry {
        id: "c_sections_2024",
        question: "Count the number of C-sections, both programmed and with labor, performed in 2024.",
        sql: C_SECTIONS_2024,
        correct: true,
        corrected_variant: false,
    },
    CorpusEntry {
        id: "ph_below_7_1",
        question: "List the name of the patients and the date of delivery for all deliveries in which the newborn has a pH lower than 7.1",
        sql: PH_BELOW,
        correct: true,
        corrected_variant: false,
    },
    CorpusEntry {
        id: "c_section_motivations",
        question: "Retrieve all motivations for C-sections, both programmed and with labor.",
        sql: MOTIVATIONS_INCORRECT,
        correct: false,
        corrected_variant: false,
    },
    CorpusEntry {
        id: "c_section_motivations_corrected",
        question: "Retrieve all motivations for C-sections, both programmed and with labor.",
        sql: MOTIVATIONS_CORRECTED,
        correct: true,
        corrected_variant: true,
    },
    CorpusEntry {
        id: "laceration_stats",
        question: "Count the number of lacerations and their percentage relative to deliveries with labor.",
        sql: LACERATIONS,
        correct: true,
        corrected_variant: false,
    },
    CorpusEntry {
        id: "induced_deliveries",
        question: "Count the number of deliveries that had inductions and their percentage with respect to all deliveries.",
        sql: INDUCED_DELIVERIES,
        correct: true,
        corrected_variant: false,
    },
    CorpusEntry {
        id: "avg_induction_interval",
        question: "Calculate the average length of the interval between induction administration time and delivery expulsion time.",
        sql: AVG_INDUCTION_INTERVAL,
        correct: true,
        corrected_variant: false,
    },
    CorpusEntry {
        id: "inductions_per_patient_2025",
        question: "Calculate the number of inductions undergone by each patient who delivered in 2025.",
        sql: INDUCTIONS_PER_PATIENT,
        correct: true,
        corrected_variant: false,
    },
    CorpusEntry {
        id: "ctg_related_patients",
        question: "Show patient data and pregnancy data for all patients whose delivery motivation, whether C-section or operative, mentions CTG in any manner.",
        sql: CTG_RELATED,
        correct: true,
        corrected_variant: false,
    },
];

/// The entries a model would produce for the eight questions: every entry
/// except hand-corrected variants.
pub fn model_outputs() -> impl Iterator<Item = &'static CorpusEntry> {
    ENTRIES.iter().filter(|e| !e.corrected_variant)
}

pub fn entry(id: &str) -> Option<&'static CorpusEntry> {
    ENTRIES.iter().find(|e| e.id == id)
}
