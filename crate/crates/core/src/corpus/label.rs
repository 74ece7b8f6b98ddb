use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The twelve entity types of the synthesis annotation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    MatFinal,
    MatSolvent,
    MatStart,
    Ope,
    PropEquip,
    PropMaker,
    PropMethod,
    PropTemp,
    PropTime,
    CharaName,
    CharaAct,
    CharaCond,
}

impl Label {
    pub const ALL: [Label; 12] = [
        Label::MatFinal,
        Label::MatSolvent,
        Label::MatStart,
        Label::Ope,
        Label::PropEquip,
        Label::PropMaker,
        Label::PropMethod,
        Label::PropTemp,
        Label::PropTime,
        Label::CharaName,
        Label::CharaAct,
        Label::CharaCond,
    ];

    pub const COUNT: usize = 12;

    pub fn as_str(self) -> &'static str {
        match self {
            Label::MatFinal => "Mat-Final",
            Label::MatSolvent => "Mat-Solvent",
            Label::MatStart => "Mat-Start",
            Label::Ope => "Ope",
            Label::PropEquip => "Prop-Equip",
            Label::PropMaker => "Prop-Maker",
            Label::PropMethod => "Prop-Method",
            Label::PropTemp => "Prop-Temp",
            Label::PropTime => "Prop-Time",
            Label::CharaName => "Chara-Name",
            Label::CharaAct => "Chara-Act",
            Label::CharaCond => "Chara-Cond",
        }
    }

    /// Position in [`Label::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    fn valid_list() -> String {
        Label::ALL.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel {
                label: s.to_string(),
                valid: Label::valid_list(),
            })
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An IOB tag. Index order is `O`, then `B-x`, `I-x` for each label in
/// [`Label::ALL`] order, giving 25 tags in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(Label),
    I(Label),
}

impl Tag {
    pub const COUNT: usize = 2 * Label::COUNT + 1;

    pub fn index(self) -> usize {
        match self {
            Tag::O => 0,
            Tag::B(l) => 1 + 2 * l.index(),
            Tag::I(l) => 2 + 2 * l.index(),
        }
    }

    pub fn from_index(index: usize) -> Option<Tag> {
        match index {
            0 => Some(Tag::O),
            i if i < Tag::COUNT => {
                let label = Label::ALL[(i - 1) / 2];
                Some(if i % 2 == 1 { Tag::B(label) } else { Tag::I(label) })
            }
            _ => None,
        }
    }

    /// All 25 tags in index order.
    pub fn inventory() -> Vec<Tag> {
        (0..Tag::COUNT).filter_map(Tag::from_index).collect()
    }

    pub fn label(self) -> Option<Label> {
        match self {
            Tag::O => None,
            Tag::B(l) | Tag::I(l) => Some(l),
        }
    }

    /// Whether `next` may follow `self` in a well-formed IOB sequence.
    /// `None` stands for the sequence start.
    pub fn allows_transition(prev: Option<Tag>, next: Tag) -> bool {
        match next {
            Tag::I(l) => matches!(prev, Some(Tag::B(p)) | Some(Tag::I(p)) if p == l),
            _ => true,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(l) => write!(f, "B-{l}"),
            Tag::I(l) => write!(f, "I-{l}"),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::O);
        }
        let unknown = || Error::UnknownTag(s.to_string());
        let (prefix, label) = s.split_once('-').ok_or_else(unknown)?;
        let label: Label = label.parse().map_err(|_| unknown())?;
        match prefix {
            "B" => Ok(Tag::B(label)),
            "I" => Ok(Tag::I(label)),
            _ => Err(unknown()),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_has_25_tags() {
        let tags = Tag::inventory();
        assert_eq!(tags.len(), 25);
        for (i, t) in tags.iter().enumerate() {
            assert_eq!(t.index(), i);
            assert_eq!(t.to_string().parse::<Tag>().unwrap(), *t);
        }
        assert_eq!(tags[0], Tag::O);
    }

    #[test]
    fn unknown_label_lists_valid_ones() {
        let err = "Mat-Other".parse::<Label>().unwrap_err().to_string();
        assert!(err.contains("Mat-Other"));
        for l in Label::ALL {
            assert!(err.contains(l.as_str()));
        }
    }

    #[test]
    fn transitions() {
        let ope = Label::Ope;
        assert!(!Tag::allows_transition(None, Tag::I(ope)));
        assert!(!Tag::allows_transition(Some(Tag::O), Tag::I(ope)));
        assert!(!Tag::allows_transition(Some(Tag::B(Label::PropTemp)), Tag::I(ope)));
        assert!(Tag::allows_transition(Some(Tag::B(ope)), Tag::I(ope)));
        assert!(Tag::allows_transition(Some(Tag::I(ope)), Tag::I(ope)));
        assert!(Tag::allows_transition(Some(Tag::I(ope)), Tag::O));
    }
}
