use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::boxes::{normalize_yaw, BoxConstants};

/// What a class index means.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassKind {
    Background,
    DoNotCare,
    /// A localized object subclass: base object name plus encoding constants.
    /// Side-view and front-view orientations of one object are distinct
    /// subclasses distinguished by `constants.theta0`.
    Localized {
        base: String,
        constants: BoxConstants,
    },
}

/// Ordered class list for one detector. Always contains Background and
/// DoNotCare; every other class carries box-encoding constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    names: Vec<String>,
    kinds: Vec<ClassKind>,
    pub background: usize,
    pub do_not_care: usize,
}

impl ClassSpec {
    /// Build a spec from (name, kind) pairs. Exactly one Background and one
    /// DoNotCare are expected.
    pub fn new(classes: Vec<(String, ClassKind)>) -> Self {
        let background = classes
            .iter()
            .position(|(_, k)| matches!(k, ClassKind::Background))
            .expect("Background class required");
        let do_not_care = classes
            .iter()
            .position(|(_, k)| matches!(k, ClassKind::DoNotCare))
            .expect("DoNotCare class required");
        let (names, kinds) = classes.into_iter().unzip();
        ClassSpec {
            names,
            kinds,
            background,
            do_not_care,
        }
    }

    /// The 4-class Car detector: Background, DoNotCare, side-view Car and
    /// front-view Car with the median car dimensions.
    pub fn car() -> Self {
        Self::with_object("Car", 3.88, 1.5, 1.63)
    }

    /// The 6-class Pedestrian + Cyclist detector.
    pub fn ped_cyc() -> Self {
        let mut classes = vec![
            ("Background".to_string(), ClassKind::Background),
            ("DoNotCare".to_string(), ClassKind::DoNotCare),
        ];
        for (base, l_m, h_m, w_m) in [
            ("Pedestrian", 0.88, 1.77, 0.65),
            ("Cyclist", 1.76, 1.75, 0.6),
        ] {
            for (view, theta0) in [("side", 0.0), ("front", FRAC_PI_2)] {
                classes.push((
                    format!("{base}.{view}"),
                    ClassKind::Localized {
                        base: base.to_string(),
                        constants: BoxConstants {
                            l_m,
                            h_m,
                            w_m,
                            theta0,
                            theta_m: FRAC_PI_2,
                        },
                    },
                ));
            }
        }
        Self::new(classes)
    }

    /// A 4-class spec for a single object type with the given median size.
    pub fn with_object(base: &str, l_m: f64, h_m: f64, w_m: f64) -> Self {
        let mut classes = vec![
            ("Background".to_string(), ClassKind::Background),
            ("DoNotCare".to_string(), ClassKind::DoNotCare),
        ];
        for (view, theta0) in [("side", 0.0), ("front", FRAC_PI_2)] {
            classes.push((
                format!("{base}.{view}"),
                ClassKind::Localized {
                    base: base.to_string(),
                    constants: BoxConstants {
                        l_m,
                        h_m,
                        w_m,
                        theta0,
                        theta_m: FRAC_PI_2,
                    },
                },
            ));
        }
        Self::new(classes)
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn class_name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn kind(&self, i: usize) -> &ClassKind {
        &self.kinds[i]
    }

    /// Indices of localized (object) classes in order.
    pub fn localized_classes(&self) -> Vec<usize> {
        (0..self.kinds.len())
            .filter(|&i| matches!(self.kinds[i], ClassKind::Localized { .. }))
            .collect()
    }

    /// Position of `class` within `localized_classes()`, if localized.
    pub fn localized_slot(&self, class: usize) -> Option<usize> {
        self.localized_classes().iter().position(|&c| c == class)
    }

    pub fn constants(&self, class: usize) -> Option<BoxConstants> {
        match &self.kinds[class] {
            ClassKind::Localized { constants, .. } => Some(*constants),
            _ => None,
        }
    }

    /// Base object name of a localized class.
    pub fn base_name(&self, class: usize) -> Option<&str> {
        match &self.kinds[class] {
            ClassKind::Localized { base, .. } => Some(base),
            _ => None,
        }
    }

    /// Select the side-view or front-view subclass of `base` for a yaw:
    /// normalized yaw in [-pi/4, pi/4) is side-view (theta0 = 0), the rest
    /// of the bin is front-view (theta0 = pi/2).
    pub fn subclass_for(&self, base: &str, yaw: f64) -> Option<usize> {
        let target_theta0 = if normalize_yaw(yaw) < FRAC_PI_4 {
            0.0
        } else {
            FRAC_PI_2
        };
        (0..self.kinds.len()).find(|&i| match &self.kinds[i] {
            ClassKind::Localized { base: b, constants } => {
                b == base && (constants.theta0 - target_theta0).abs() < 1e-12
            }
            _ => false,
        })
    }
}
