use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus::{FieldMap, TaskId, TaskSpec};

use super::descriptions::DescriptionStore;
use super::render::{render_document, render_query};
use super::template::TemplateSet;
use super::PromptError;

/// Everything needed to turn queries and items of any task into text.
#[derive(Debug)]
pub struct PromptContext {
    pub specs: BTreeMap<TaskId, TaskSpec>,
    pub templates: TemplateSet,
    pub descriptions: DescriptionStore,
}

impl PromptContext {
    /// Fails when a spec has no instruction template.
    pub fn new(
        specs: impl IntoIterator<Item = TaskSpec>,
        templates: TemplateSet,
        descriptions: DescriptionStore,
    ) -> Result<Self, PromptError> {
        let specs: BTreeMap<TaskId, TaskSpec> = specs.into_iter().map(|s| (s.task_id, s)).collect();
        for task in specs.keys() {
            if !templates.contains_key(task) {
                return Err(PromptError::Template(format!("no instruction template for {task}")));
            }
        }
        Ok(PromptContext { specs, templates, descriptions })
    }

    /// Panics when `task` has no spec; construction guarantees templates.
    pub fn spec(&self, task: TaskId) -> &TaskSpec {
        self.specs
            .get(&task)
            .unwrap_or_else(|| panic!("no task spec for {task}"))
    }

    pub fn variant_count(&self, task: TaskId) -> usize {
        self.templates[&task].variants.len()
    }

    pub fn render_query<R: Rng + ?Sized>(
        &self,
        task: TaskId,
        query: &FieldMap,
        variant: usize,
        p_desc: f64,
        rng: &mut R,
    ) -> String {
        render_query(
            query,
            self.spec(task),
            &self.templates[&task],
            variant,
            &self.descriptions,
            p_desc,
            rng,
        )
    }

    pub fn render_document(&self, task: TaskId, item: &str) -> String {
        render_document(item, self.spec(task))
    }

    /// All text the encoder may see: every instruction variant, description
    /// sentence and label, and the given queries and items fully rendered.
    pub fn vocabulary_texts<'a>(
        &'a self,
        queries: impl IntoIterator<Item = (TaskId, &'a FieldMap)>,
        items: impl IntoIterator<Item = (TaskId, &'a str)>,
    ) -> Vec<String> {
        let mut texts: Vec<String> = Vec::new();
        for t in self.templates.values() {
            texts.extend(t.variants.iter().map(|v| format!("Instruct: {v} Query:")));
        }
        for spec in self.specs.values() {
            for d in &spec.described_fields {
                texts.push(format!("{} description:", d.field));
            }
        }
        texts.extend(self.descriptions.iter().map(|d| d.sentence.clone()));
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        for (task, q) in queries {
            texts.push(self.render_query(task, q, 0, 0.0, &mut rng));
        }
        for (task, item) in items {
            texts.push(self.render_document(task, item));
        }
        texts
    }
}
